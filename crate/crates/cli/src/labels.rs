//! Label lists for `report`: plain one-per-line files or a column of a CSV.

use std::path::Path;

use anyhow::{bail, Context};

use cogload::LoadLabel;

/// Reads labels from `path`. A CSV header row holding `column` selects that
/// column; otherwise every non-empty line is one label.
pub fn read_labels(path: &Path, column: &str) -> anyhow::Result<Vec<LoadLabel>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_labels(&text, column).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_labels(text: &str, column: &str) -> anyhow::Result<Vec<LoadLabel>> {
    let first = text.lines().next().unwrap_or("");
    if first.split(',').any(|h| h.trim() == column) {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let idx = rdr
            .headers()?
            .iter()
            .position(|h| h.trim() == column)
            .expect("column present in header");
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw = rec.get(idx).unwrap_or("");
            if raw.is_empty() {
                bail!("row {}: empty `{column}`", i + 1);
            }
            out.push(raw.parse().map_err(|e| anyhow::anyhow!("row {}: {e}", i + 1))?);
        }
        return Ok(out);
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| l.parse().map_err(|e| anyhow::anyhow!("line {}: {e}", i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_list() {
        let got = parse_labels("Low\nHigh\n\nBaseline\n", "label").unwrap();
        assert_eq!(got, vec![LoadLabel::Low, LoadLabel::High, LoadLabel::Baseline]);
    }

    #[test]
    fn csv_column() {
        let text = "tick,label,predicted\n1,Low,High\n2,High,High\n";
        assert_eq!(parse_labels(text, "predicted").unwrap(), vec![LoadLabel::High; 2]);
        assert_eq!(parse_labels(text, "label").unwrap(), vec![LoadLabel::Low, LoadLabel::High]);
    }

    #[test]
    fn bad_label() {
        assert!(parse_labels("Low\nMedium\n", "label").is_err());
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Subcommand;
use serde::Serialize;

use cogload::stats::{
    chi_square_independence, contingency, frequency_ratios, kruskal_wallis, load_trend, trend_svg, tukey_hsd,
    ChiSquareResult, KruskalResult, ParticipantSeries, DEFAULT_ALPHAS,
};
use cogload::{Band, Difficulty, LoadLabel, Task, FEATURE_DIM};

use crate::commands::write_json;

#[derive(Subcommand)]
pub enum StatsCmd {
    /// Kruskal-Wallis across load classes for every feature of a feature CSV.
    Kruskal {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chi-square independence test with Cramer's V and Phi.
    Chi2 {
        /// Classified CSV: difficulty by predicted label.
        #[arg(long = "in", conflicts_with_all = ["table", "statistic"])]
        input: Option<PathBuf>,
        /// Contingency table as JSON, e.g. `[[10,20],[30,40]]`.
        #[arg(long)]
        table: Option<String>,
        /// Effect sizes from a reported statistic; needs --n and --shape.
        #[arg(long, requires_all = ["n", "shape"])]
        statistic: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        /// Table shape as `ROWSxCOLS`.
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tukey HSD over groups, e.g. TLX composites by phase.
    Tukey {
        /// TLX event lines (NDJSON) or a CSV with `group,value` columns.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted-label percentages per exam difficulty.
    Ratios {
        /// Classified CSV.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-tick mean quantified load per exam difficulty, with SVG charts.
    Trend {
        /// Classified CSV.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for `trend_low.svg` and `trend_high.svg`.
        #[arg(long = "svg-dir")]
        svg_dir: Option<PathBuf>,
    },
}

pub fn run(cmd: StatsCmd) -> anyhow::Result<()> {
    match cmd {
        StatsCmd::Kruskal { input, out } => write_json(&kruskal(&input)?, out.as_deref()),
        StatsCmd::Chi2 {
            input,
            table,
            statistic,
            n,
            shape,
            out,
        } => write_json(&chi2(input.as_deref(), table.as_deref(), statistic, n, shape.as_deref())?, out.as_deref()),
        StatsCmd::Tukey { input, out } => {
            let groups = read_groups(&input)?;
            write_json(&tukey_hsd(&groups, &DEFAULT_ALPHAS)?, out.as_deref())
        }
        StatsCmd::Ratios { input, out } => {
            let rows = read_classified(&input)?;
            let (pred, diff) = exam_columns(&rows)?;
            write_json(&frequency_ratios(&pred, &diff)?, out.as_deref())
        }
        StatsCmd::Trend { input, out, svg_dir } => {
            let rows = read_classified(&input)?;
            let trends = load_trend(&series(&rows))?;
            if let Some(dir) = svg_dir {
                std::fs::create_dir_all(&dir)?;
                for t in &trends {
                    let name = format!("trend_{}.svg", t.difficulty.as_str().to_lowercase());
                    std::fs::write(dir.join(name), trend_svg(t))?;
                }
            }
            write_json(&trends, out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct FeatureKruskal {
    feature: String,
    #[serde(flatten)]
    result: KruskalResult,
}

fn kruskal(input: &Path) -> anyhow::Result<Vec<FeatureKruskal>> {
    let rows = cogload::features::read_features_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let names: Vec<&str> = Band::ALL.iter().map(|b| b.display_name()).chain(["HRV"]).collect();
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for (j, name) in names.iter().enumerate() {
        let groups: Vec<Vec<f64>> = LoadLabel::ALL
            .iter()
            .map(|l| {
                rows.iter()
                    .filter(|r| r.label == Some(*l))
                    .map(|r| r.features.to_array()[j])
                    .collect()
            })
            .filter(|g: &Vec<f64>| !g.is_empty())
            .collect();
        out.push(FeatureKruskal {
            feature: name.to_string(),
            result: kruskal_wallis(&groups)?,
        });
    }
    Ok(out)
}

fn parse_shape(s: &str) -> anyhow::Result<(usize, usize)> {
    let (r, c) = s.split_once('x').context("--shape is ROWSxCOLS")?;
    Ok((r.trim().parse()?, c.trim().parse()?))
}

fn chi2(
    input: Option<&Path>,
    table: Option<&str>,
    statistic: Option<f64>,
    n: Option<u64>,
    shape: Option<&str>,
) -> anyhow::Result<ChiSquareResult> {
    if let Some(x) = statistic {
        let (rows, cols) = parse_shape(shape.expect("required by clap"))?;
        return Ok(ChiSquareResult::from_statistic(x, n.expect("required by clap"), rows, cols)?);
    }
    let table: Vec<Vec<u64>> = match (input, table) {
        (Some(p), _) => {
            let rows = read_classified(p)?;
            let (pred, diff) = exam_columns(&rows)?;
            let full = contingency(&pred, &diff)?;
            let keep: Vec<usize> = (0..3).filter(|&j| full.iter().any(|r| r[j] > 0)).collect();
            full.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect()
        }
        (None, Some(t)) => serde_json::from_str(t).context("--table must be a JSON array of integer rows")?,
        (None, None) => bail!("give --in, --table or --statistic"),
    };
    Ok(chi_square_independence(&table)?)
}

/// Named groups in order of first appearance.
fn read_groups(path: &Path) -> anyhow::Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    let mut push = |name: &str, v: f64| match groups.iter_mut().find(|(g, _)| g == name) {
        Some((_, vals)) => vals.push(v),
        None => groups.push((name.to_string(), vec![v])),
    };
    if text.trim_start().starts_with('{') {
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let e = cogload_service::wire::parse_event(line).with_context(|| format!("line {}", i + 1))?;
            if let cogload_service::Event::Tlx { phase, composite, .. } = e {
                push(&phase, composite);
            }
        }
    } else {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let h = rdr.headers()?.clone();
        let gi = h.iter().position(|c| c == "group").context("CSV needs a `group` column")?;
        let vi = h.iter().position(|c| c == "value").context("CSV needs a `value` column")?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v: f64 = rec[vi].parse().with_context(|| format!("row {}: bad value", i + 1))?;
            push(&rec[gi], v);
        }
    }
    Ok(groups)
}

struct Classified {
    participant: String,
    task: Task,
    tick: u32,
    predicted: LoadLabel,
}

fn read_classified(path: &Path) -> anyhow::Result<Vec<Classified>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let h = rdr.headers()?.clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c == name)
            .with_context(|| format!("{} has no `{name}` column; expected classify output", path.display()))
    };
    let (pi, ti, ki, di) = (col("participant")?, col("task")?, col("tick")?, col("predicted")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |c: &str| format!("row {}: bad `{c}`", i + 1);
        out.push(Classified {
            participant: rec[pi].to_string(),
            task: rec[ti].parse().map_err(|_| anyhow::anyhow!(bad("task")))?,
            tick: rec[ki].parse().with_context(|| bad("tick"))?,
            predicted: rec[di].parse().map_err(|_| anyhow::anyhow!(bad("predicted")))?,
        });
    }
    Ok(out)
}

fn exam_columns(rows: &[Classified]) -> anyhow::Result<(Vec<LoadLabel>, Vec<Difficulty>)> {
    let cols: (Vec<LoadLabel>, Vec<Difficulty>) = rows
        .iter()
        .filter_map(|r| r.task.difficulty().map(|d| (r.predicted, d)))
        .unzip();
    if cols.0.is_empty() {
        bail!("no exam rows (tasks ExamLow/ExamHigh)");
    }
    Ok(cols)
}

/// Participant label streams per difficulty, in tick order.
fn series(rows: &[Classified]) -> Vec<ParticipantSeries> {
    let mut by_key: BTreeMap<(String, Difficulty), Vec<(u32, LoadLabel)>> = BTreeMap::new();
    for r in rows {
        if let Some(d) = r.task.difficulty() {
            by_key.entry((r.participant.clone(), d)).or_default().push((r.tick, r.predicted));
        }
    }
    by_key
        .into_iter()
        .map(|((participant_id, difficulty), mut ticks)| {
            ticks.sort_by_key(|t| t.0);
            ParticipantSeries {
                participant_id,
                difficulty,
                labels: ticks.into_iter().map(|t| t.1).collect(),
            }
        })
        .collect()
}

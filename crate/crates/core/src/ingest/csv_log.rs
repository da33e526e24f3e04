//! Canonical session log: one row per tick.
//!
//! ```text
//! participant,round,task,tick,quality,delta,theta,low_alpha,high_alpha,
//! low_beta,high_beta,low_gamma,middle_gamma,rr_list
//! ```
//!
//! `rr_list` joins the tick's R-R intervals (ms) with `;` and may be empty.
//! Floats are written in shortest round-trip form so a write/read cycle is
//! lossless.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::record::SampleRecord;
use crate::domain::{Task, BAND_COUNT};

pub const SESSION_HEADER: [&str; 14] = [
    "participant",
    "round",
    "task",
    "tick",
    "quality",
    "delta",
    "theta",
    "low_alpha",
    "high_alpha",
    "low_beta",
    "high_beta",
    "low_gamma",
    "middle_gamma",
    "rr_list",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("row {row}, column `{column}`: bad value `{value}`")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checks a header row against an expected schema.
pub fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), CsvError> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(CsvError::SchemaMismatch {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

/// Parses field `col` of `row`; `line` is the 1-based data row index.
pub(crate) fn field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    col: usize,
    header: &[&str],
    line: usize,
) -> Result<T, CsvError> {
    let raw = row.get(col).unwrap_or("");
    raw.parse().map_err(|_| CsvError::BadValue {
        row: line,
        column: header[col].to_string(),
        value: raw.to_string(),
    })
}

/// Incremental log writer; the header is written on creation.
pub struct SessionLogWriter<W: Write> {
    w: csv::Writer<W>,
}

impl<W: Write> SessionLogWriter<W> {
    pub fn new(out: W) -> Result<Self, CsvError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SESSION_HEADER)?;
        Ok(Self { w })
    }

    pub fn append(&mut self, r: &SampleRecord) -> Result<(), CsvError> {
        let mut row: Vec<String> = Vec::with_capacity(SESSION_HEADER.len());
        row.push(r.participant_id.clone());
        row.push(r.round.to_string());
        row.push(r.task.as_str().to_string());
        row.push(r.tick.to_string());
        row.push(r.quality.to_string());
        row.extend(r.band_power.iter().map(|p| p.to_string()));
        row.push(
            r.rr_intervals
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        self.w.write_record(&row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CsvError> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn write_records<W: Write>(records: &[SampleRecord], out: W) -> Result<(), CsvError> {
    let mut w = SessionLogWriter::new(out)?;
    for r in records {
        w.append(r)?;
    }
    w.flush()
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<SampleRecord>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(rdr.headers()?, &SESSION_HEADER)?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let h = &SESSION_HEADER[..];
        let round: u8 = field(&row, 1, h, line)?;
        if round == 0 {
            return Err(bad(line, "round", &row[1]));
        }
        let task: Task = field(&row, 2, h, line)?;
        let tick: u32 = field(&row, 3, h, line)?;
        let quality: u8 = field(&row, 4, h, line)?;
        let mut band_power = [0.0; BAND_COUNT];
        for (b, slot) in band_power.iter_mut().enumerate() {
            let v: f64 = field(&row, 5 + b, h, line)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(line, SESSION_HEADER[5 + b], &row[5 + b]));
            }
            *slot = v;
        }
        let rr_raw = &row[13];
        let mut rr_intervals = Vec::new();
        if !rr_raw.is_empty() {
            for part in rr_raw.split(';') {
                let v: f64 = part.parse().map_err(|_| bad(line, "rr_list", rr_raw))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad(line, "rr_list", rr_raw));
                }
                rr_intervals.push(v);
            }
        }
        records.push(SampleRecord {
            participant_id: row[0].to_string(),
            round,
            task,
            tick,
            quality,
            band_power,
            rr_intervals,
        });
    }
    Ok(records)
}

fn bad(row: usize, column: &str, value: &str) -> CsvError {
    CsvError::BadValue {
        row,
        column: column.to_string(),
        value: value.to_string(),
    }
}

pub fn write_csv(records: &[SampleRecord], path: impl AsRef<Path>) -> Result<(), CsvError> {
    write_records(records, File::create(path)?)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>, CsvError> {
    read_records(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(tick: u32) -> SampleRecord {
        SampleRecord::new("P,01", 2, Task::TwoBack, tick, [0.1, 2.5, 1e9, 0.0, 3.0, 4.0, 5.0, 6.25])
            .with_rr([812.5, 799.0])
    }

    #[test]
    fn header_only_file_is_empty() {
        let text = SESSION_HEADER.join(",") + "\n";
        assert!(read_records(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn missing_column_is_schema_mismatch() {
        let header: Vec<&str> = SESSION_HEADER.iter().copied().filter(|c| *c != "rr_list").collect();
        let text = header.join(",") + "\n";
        assert!(matches!(read_records(text.as_bytes()), Err(CsvError::SchemaMismatch { .. })));
    }

    #[test]
    fn bad_value_reports_row_and_column() {
        let mut buf = Vec::new();
        write_records(&[sample(1), sample(2)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",TwoBack,2,", ",TwoBack,x,");
        match read_records(text.as_bytes()) {
            Err(CsvError::BadValue { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "tick");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_rr_list_round_trips() {
        let mut r = sample(3);
        r.rr_intervals.clear();
        let mut buf = Vec::new();
        write_records(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(read_records(&buf[..]).unwrap(), vec![r]);
    }

    fn arb_record() -> impl Strategy<Value = SampleRecord> {
        (
            "[A-Za-z0-9 ,\"]{1,8}",
            1u8..=2,
            0usize..Task::ALL.len(),
            any::<u32>(),
            0u8..=200,
            proptest::array::uniform8(0.0f64..1e12),
            proptest::collection::vec(200.001f64..2999.999, 0..4),
        )
            .prop_map(|(p, round, t, tick, quality, band_power, rr)| SampleRecord {
                participant_id: p,
                round,
                task: Task::ALL[t],
                tick,
                quality,
                band_power,
                rr_intervals: rr,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_identity(records in proptest::collection::vec(arb_record(), 0..20)) {
            let mut buf = Vec::new();
            write_records(&records, &mut buf).unwrap();
            prop_assert_eq!(read_records(&buf[..]).unwrap(), records);
        }
    }
}

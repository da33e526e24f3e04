//! Batch classification of a recorded session or feature file.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cogload::evaluation::{score, EvalError, MetricsReport};
use cogload::features::{featurize_stream, read_feature_rows, FeatureError, FEATURE_HEADER, DEFAULT_RR_WINDOW};
use cogload::ingest::{read_records, CsvError, SESSION_HEADER};
use cogload::stats::{chi_square_independence, contingency, frequency_ratios, ChiSquareResult, FrequencyRatios, StatsError};
use cogload::{Difficulty, FeatureRow, ForestModel, LoadLabel, FEATURE_DIM};

pub const PREDICTION_COLUMNS: [&str; 4] = ["predicted", "p_baseline", "p_low", "p_high"];

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("input header matches neither the session log nor the feature schema: `{0}`")]
    SchemaMismatch(String),
    #[error("model expects {found} features, files provide {expected}")]
    ModelDimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Difficulty-by-prediction contingency analysis. Predicted classes that
/// never occur are dropped from the table before testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyAnalysis {
    /// Rows in [`Difficulty`] order, columns in `classes` order.
    pub table: Vec<Vec<u64>>,
    pub classes: Vec<LoadLabel>,
    pub chi_square: Option<ChiSquareResult>,
    pub ratios: Vec<FrequencyRatios>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub rows: usize,
    pub predictions: Vec<LoadLabel>,
    /// Over rows with a true label; `None` when there are none.
    pub metrics: Option<MetricsReport>,
    /// Over rows from difficulty-graded tasks; `None` when there are none.
    pub difficulty: Option<DifficultyAnalysis>,
}

fn load_rows(text: &str) -> Result<Vec<FeatureRow>, ClassifyError> {
    let header: Vec<&str> = text.lines().next().unwrap_or("").trim_end_matches('\r').split(',').collect();
    if header == SESSION_HEADER {
        let records = read_records(text.as_bytes())?;
        Ok(featurize_stream(&records, DEFAULT_RR_WINDOW)?)
    } else if header == FEATURE_HEADER {
        Ok(read_feature_rows(text.as_bytes())?)
    } else {
        Err(ClassifyError::SchemaMismatch(header.join(",")))
    }
}

fn analyse_difficulty(rows: &[FeatureRow], predictions: &[LoadLabel]) -> Result<Option<DifficultyAnalysis>, ClassifyError> {
    let (pred, diff): (Vec<LoadLabel>, Vec<Difficulty>) = rows
        .iter()
        .zip(predictions)
        .filter_map(|(r, p)| r.task.difficulty().map(|d| (*p, d)))
        .unzip();
    if pred.is_empty() {
        return Ok(None);
    }
    let full = contingency(&pred, &diff)?;
    let classes: Vec<LoadLabel> = LoadLabel::ALL
        .into_iter()
        .filter(|l| full.iter().any(|row| row[l.index()] > 0))
        .collect();
    let table: Vec<Vec<u64>> = full
        .iter()
        .map(|row| classes.iter().map(|l| row[l.index()]).collect())
        .collect();
    let chi_square = match chi_square_independence(&table) {
        Ok(c) => Some(c),
        Err(StatsError::TableShape { .. } | StatsError::ZeroMarginal) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Some(DifficultyAnalysis {
        table,
        classes,
        chi_square,
        ratios: frequency_ratios(&pred, &diff)?,
    }))
}

/// Classify every row of a session log or feature CSV and write the feature
/// rows with predicted label and class probabilities appended.
///
/// Session logs are featurized exactly as a live session would, without
/// head truncation, so the predictions equal the ones published live.
pub fn classify_file<R: Read, W: Write>(model: &ForestModel, mut input: R, output: W) -> Result<ClassifyReport, ClassifyError> {
    if model.n_features() != FEATURE_DIM {
        return Err(ClassifyError::ModelDimMismatch {
            expected: FEATURE_DIM,
            found: model.n_features(),
        });
    }
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let rows = load_rows(&text)?;

    let mut w = csv::Writer::from_writer(output);
    w.write_record(FEATURE_HEADER.iter().chain(&PREDICTION_COLUMNS))
        .map_err(CsvError::from)?;
    let mut predictions = Vec::with_capacity(rows.len());
    for r in &rows {
        let x = r.features.to_array();
        let proba = model.proba_by_label(&x).expect("dimension checked");
        let predicted = model.predict(&x).expect("dimension checked");
        predictions.push(predicted);
        let mut rec: Vec<String> = vec![
            r.participant_id.clone(),
            r.round.to_string(),
            r.task.as_str().to_string(),
            r.tick.to_string(),
        ];
        rec.extend(x.iter().map(|v| v.to_string()));
        rec.push(r.label.map(|l| l.as_str().to_string()).unwrap_or_default());
        rec.push(predicted.as_str().to_string());
        rec.extend(proba.iter().map(|p| p.to_string()));
        w.write_record(&rec).map_err(CsvError::from)?;
    }
    w.flush()?;

    let (truth, pred): (Vec<LoadLabel>, Vec<LoadLabel>) = rows
        .iter()
        .zip(&predictions)
        .filter_map(|(r, p)| r.label.map(|l| (l, *p)))
        .unzip();
    let metrics = if truth.is_empty() { None } else { Some(score(&truth, &pred)?) };
    let difficulty = analyse_difficulty(&rows, &predictions)?;
    Ok(ClassifyReport {
        rows: rows.len(),
        predictions,
        metrics,
        difficulty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cogload::features::write_feature_rows;
    use cogload::ingest::write_records;
    use cogload::synth::{generate_cohort, generate_exam_session, ClassProfiles, ExamMix, SyntheticCohort};
    use cogload::{ForestConfig, Task};

    fn model() -> ForestModel {
        let records = generate_cohort(&SyntheticCohort::new(3, 11), &ClassProfiles::default());
        let rows = featurize_stream(&records, DEFAULT_RR_WINDOW).unwrap();
        let (x, y): (Vec<[f64; 9]>, Vec<LoadLabel>) = rows
            .iter()
            .filter_map(|r| r.label.map(|l| (r.features.to_array(), l)))
            .unzip();
        cogload::forest::fit(&x, &y, &ForestConfig::default().with_trees(20).with_seed(1)).unwrap()
    }

    #[test]
    fn unlabeled_feature_file_gives_predictions_only() {
        let m = model();
        let rows: Vec<FeatureRow> = (1..=4)
            .map(|t| FeatureRow {
                participant_id: "P01".into(),
                round: 1,
                task: Task::Unlabeled,
                tick: t,
                features: cogload::FeatureVector::from_array([300.0; 9]),
                label: None,
            })
            .collect();
        let mut input = Vec::new();
        write_feature_rows(&rows, &mut input).unwrap();
        let mut out = Vec::new();
        let report = classify_file(&m, &input[..], &mut out).unwrap();
        assert_eq!(report.rows, 4);
        assert!(report.metrics.is_none() && report.difficulty.is_none());
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().next().unwrap().ends_with("label,predicted,p_baseline,p_low,p_high"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn labeled_session_log_gets_a_report() {
        let m = model();
        let records = generate_cohort(&SyntheticCohort::new(1, 99), &ClassProfiles::default());
        let mut input = Vec::new();
        write_records(&records, &mut input).unwrap();
        let report = classify_file(&m, &input[..], std::io::sink()).unwrap();
        let metrics = report.metrics.unwrap();
        assert_eq!(metrics.total, 520);
        assert!(metrics.accuracy > 0.9, "accuracy {}", metrics.accuracy);
    }

    #[test]
    fn exam_file_gets_a_two_by_three_chi_square() {
        let m = model();
        let exam = generate_exam_session(2, 120, &ExamMix::default(), &ClassProfiles::default(), 0.05, 4);
        let mut input = Vec::new();
        write_records(&exam.records, &mut input).unwrap();
        let report = classify_file(&m, &input[..], std::io::sink()).unwrap();
        assert!(report.metrics.is_none());
        let d = report.difficulty.unwrap();
        assert_eq!(d.table.len(), 2);
        let c = d.chi_square.unwrap();
        assert_eq!(c.df, 2);
        assert_eq!(c.n, 480);
        assert_eq!(d.ratios.len(), 2);
    }

    #[test]
    fn rejects_unknown_schema_and_wrong_model() {
        let m = model();
        assert!(matches!(
            classify_file(&m, &b"a,b,c\n1,2,3\n"[..], std::io::sink()),
            Err(ClassifyError::SchemaMismatch(_))
        ));
        let small = cogload::forest::fit(&[[0.0], [1.0]], &[LoadLabel::Low, LoadLabel::High], &ForestConfig::default().with_trees(2)).unwrap();
        assert!(matches!(
            classify_file(&small, &b""[..], std::io::sink()),
            Err(ClassifyError::ModelDimMismatch { expected: 9, found: 1 })
        ));
    }
}

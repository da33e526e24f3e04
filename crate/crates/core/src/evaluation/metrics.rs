use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::LoadLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: LoadLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when the value was defined as 0 because its denominator was 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class and averaged classification metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Classes seen in truth or predictions, ascending.
    pub classes: Vec<LoadLabel>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: usize,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    /// `confusion[i][j]`: true `classes[i]`, predicted `classes[j]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn score(truth: &[LoadLabel], predicted: &[LoadLabel]) -> Result<MetricsReport, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut classes: Vec<LoadLabel> = truth.iter().chain(predicted).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let pos = |l: &LoadLabel| classes.binary_search(l).expect("class present");

    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[pos(t)][pos(p)] += 1;
    }
    let total = truth.len();

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i] as f64;
            let support: usize = confusion[i].iter().sum();
            let predicted_i: usize = confusion.iter().map(|row| row[i]).sum();
            let (precision, precision_undefined) = ratio(tp, predicted_i as f64);
            let (recall, recall_undefined) = ratio(tp, support as f64);
            let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
            ClassMetrics {
                label: classes[i],
                precision,
                recall,
                f1,
                support,
                precision_undefined,
                recall_undefined,
                f1_undefined,
            }
        })
        .collect();

    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let kf = k as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / kf,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / kf,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / kf,
        support: total,
    };
    let w = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
    };
    let weighted_avg = Averages {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f1: w(|c| c.f1),
        support: total,
    };
    Ok(MetricsReport {
        classes,
        per_class,
        accuracy: trace as f64 / total as f64,
        total,
        macro_avg,
        weighted_avg,
        confusion,
    })
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

impl MetricsReport {
    /// Micro-averaged F1 over all samples.
    pub fn micro_f1(&self) -> f64 {
        let k = self.classes.len();
        let tp: usize = (0..k).map(|i| self.confusion[i][i]).sum();
        let fp: usize = (0..k)
            .map(|j| (0..k).filter(|&i| i != j).map(|i| self.confusion[i][j]).sum::<usize>())
            .sum();
        let fn_: usize = (0..k)
            .map(|i| (0..k).filter(|&j| j != i).map(|j| self.confusion[i][j]).sum::<usize>())
            .sum();
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / (tp + fn_) as f64;
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Plain-text table: precision, recall, f1-score and support per class,
    /// then accuracy, macro and weighted averages, two decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>12} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support");
        s.push('\n');
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:>12} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                c.label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            );
        }
        s.push('\n');
        let _ = writeln!(s, "{:>12} {:>9} {:>9} {:>9.2} {:>9}", "accuracy", "", "", self.accuracy, self.total);
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                s,
                "{:>12} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                name, a.precision, a.recall, a.f1, a.support
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LoadLabel::*;

    #[test]
    fn perfect_predictions() {
        let t = vec![Baseline, Low, High, High];
        let r = score(&t, &t).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for c in &r.per_class {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn hand_computed_two_class_case() {
        // A = Baseline, B = Low
        let r = score(&[Baseline, Baseline, Low, Low], &[Baseline, Low, Low, Low]).unwrap();
        let a = &r.per_class[0];
        let b = &r.per_class[1];
        assert_eq!(a.precision, 1.0);
        assert_eq!(a.recall, 0.5);
        assert!((b.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.recall, 1.0);
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn class_absent_from_predictions() {
        let r = score(&[High, Low, Low], &[Low, Low, Low]).unwrap();
        let high = r.per_class.iter().find(|c| c.label == High).unwrap();
        assert_eq!(high.precision, 0.0);
        assert!(high.precision_undefined);
        assert!(high.f1_undefined);
        assert!(r.per_class.iter().all(|c| c.precision.is_finite()));
    }

    #[test]
    fn errors() {
        assert!(matches!(score(&[Low], &[]), Err(EvalError::LengthMismatch(1, 0))));
        assert!(matches!(score(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn text_layout() {
        let r = score(&[Baseline, Low, High, High], &[Baseline, Low, High, Low]).unwrap();
        let text = r.to_text();
        assert!(text.contains("precision"));
        assert!(text.lines().any(|l| l.trim_start().starts_with("weighted avg")));
        assert!(text.lines().any(|l| l.trim_start().starts_with("accuracy") && l.ends_with("4")));
    }
}

use serde::{Deserialize, Serialize};

use super::special::chi2_sf;
use super::StatsError;

pub const MIN_TOTAL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalResult {
    pub h_statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Midranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H test with midranks and tie correction.
///
/// When every value is tied the correction factor is zero; H is then
/// reported as 0 with p = 1.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<KruskalResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    if let Some(&v) = all.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(v));
    }
    let n = all.len();
    if n < MIN_TOTAL {
        return Err(StatsError::TooFewObservations { n, min: MIN_TOTAL });
    }
    let (ranks, ties) = midranks(&all);
    let nf = n as f64;
    let centre = (nf + 1.0) / 2.0;
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let mean_rank = ranks[offset..offset + len].iter().sum::<f64>() / len as f64;
        sum += len as f64 * (mean_rank - centre).powi(2);
        offset += len;
    }
    let df = groups.len() - 1;
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalResult {
            h_statistic: 0.0,
            df,
            p_value: 1.0,
        });
    }
    let h = 12.0 / (nf * (nf + 1.0)) * sum / correction;
    Ok(KruskalResult {
        h_statistic: h,
        df,
        p_value: chi2_sf(h, df as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0, 3.0]);
        assert_eq!(r, vec![4.0, 1.0, 4.0, 2.0, 4.0]);
        assert_eq!(t, 24.0);
    }

    #[test]
    fn separated_triplets() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.h_statistic - 27.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        assert!((r.p_value - 0.049_534_613_435_626_915).abs() < 1e-12);
    }

    #[test]
    fn all_tied_gives_zero() {
        let r = kruskal_wallis(&[vec![5.0; 3], vec![5.0; 3]]).unwrap();
        assert_eq!(r.h_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn three_groups_with_ties() {
        // reference: H = 9.849061861415572, p = 0.007266133800809759
        let a = [6.4, 6.8, 7.2, 8.3, 8.4, 9.1, 9.4, 9.7];
        let b = [2.5, 3.7, 4.9, 5.4, 5.9, 8.1, 8.2];
        let c = [1.3, 4.1, 4.9, 5.2, 5.5, 8.2];
        let r = kruskal_wallis(&[&a[..], &b[..], &c[..]]).unwrap();
        assert!((r.h_statistic - 9.849_061_861_415_572).abs() < 1e-9);
        assert!((r.p_value - 0.007_266_133_800_809_759).abs() < 1e-9);
        assert_eq!(r.df, 2);
    }

    #[test]
    fn errors() {
        assert_eq!(kruskal_wallis(&[vec![1.0]]), Err(StatsError::TooFewGroups(1)));
        assert_eq!(kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![]]), Err(StatsError::EmptyGroup(1)));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0, 2.0], vec![3.0]]),
            Err(StatsError::TooFewObservations { n: 3, .. })
        ));
    }
}

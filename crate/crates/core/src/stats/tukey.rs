use serde::{Deserialize, Serialize};

use super::special::ptukey;
use super::StatsError;

pub const DEFAULT_ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub a: String,
    pub b: String,
    /// `mean(b) - mean(a)`.
    pub mean_difference: f64,
    pub q: f64,
    pub p_value: f64,
    /// Smallest alpha level the p-value falls below, if any.
    pub bucket: Option<f64>,
    /// Number of alpha levels the p-value falls below.
    pub stars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub groups: Vec<String>,
    pub means: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Pooled within-group variance.
    pub mse: f64,
    pub df_within: usize,
    pub alphas: Vec<f64>,
    /// `differences[i][j] = means[j] - means[i]`.
    pub differences: Vec<Vec<f64>>,
    /// Every `i < j` pair in group order.
    pub pairs: Vec<TukeyPair>,
}

impl TukeyResult {
    pub fn difference(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.groups.iter().position(|g| g == a)?;
        let j = self.groups.iter().position(|g| g == b)?;
        Some(self.differences[i][j])
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&TukeyPair> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Tukey-Kramer honestly-significant-difference comparison of all group
/// pairs, pooled variance from the one-way ANOVA.
pub fn tukey_hsd<S: AsRef<str>, G: AsRef<[f64]>>(
    groups: &[(S, G)],
    alphas: &[f64],
) -> Result<TukeyResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups(k));
    }
    for (name, g) in groups {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall {
                group: name.as_ref().to_string(),
                size: g.len(),
            });
        }
        if let Some(&v) = g.iter().find(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(v));
        }
    }
    let names: Vec<String> = groups.iter().map(|(n, _)| n.as_ref().to_string()).collect();
    let sizes: Vec<usize> = groups.iter().map(|(_, g)| g.as_ref().len()).collect();
    let means: Vec<f64> = groups
        .iter()
        .map(|(_, g)| g.as_ref().iter().sum::<f64>() / g.as_ref().len() as f64)
        .collect();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|((_, g), m)| g.as_ref().iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let n_total: usize = sizes.iter().sum();
    let df_within = n_total - k;
    let mse = ss_within / df_within as f64;

    let differences: Vec<Vec<f64>> = means
        .iter()
        .map(|mi| means.iter().map(|mj| mj - mi).collect())
        .collect();

    let mut levels: Vec<f64> = alphas.to_vec();
    levels.sort_by(|a, b| b.total_cmp(a));
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = differences[i][j];
            let se = (mse / 2.0 * (1.0 / sizes[i] as f64 + 1.0 / sizes[j] as f64)).sqrt();
            let (q, p) = if diff == 0.0 {
                (0.0, 1.0)
            } else if se == 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                let q = diff.abs() / se;
                (q, (1.0 - ptukey(q, k, df_within as f64)).clamp(0.0, 1.0))
            };
            let below: Vec<f64> = levels.iter().copied().filter(|&a| p < a).collect();
            pairs.push(TukeyPair {
                a: names[i].clone(),
                b: names[j].clone(),
                mean_difference: diff,
                q,
                p_value: p,
                bucket: below.last().copied(),
                stars: below.len(),
            });
        }
    }
    Ok(TukeyResult {
        groups: names,
        means,
        sizes,
        mse,
        df_within,
        alphas: levels,
        differences,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups() {
        let g = vec![1.0, 2.0, 3.0, 4.0];
        let r = tukey_hsd(&[("a", g.clone()), ("b", g)], &DEFAULT_ALPHAS).unwrap();
        let p = &r.pairs[0];
        assert_eq!(p.mean_difference, 0.0);
        assert_eq!(p.p_value, 1.0);
        assert_eq!(p.stars, 0);
        assert_eq!(p.bucket, None);
    }

    #[test]
    fn extreme_separation_reaches_the_strictest_bucket() {
        let a: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.033).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let r = tukey_hsd(&[("a", a), ("b", b)], &DEFAULT_ALPHAS).unwrap();
        let p = &r.pairs[0];
        // q_{0.999}(k = 2, df = 18)
        assert!(p.q > 5.546_044_712_660_421);
        assert!(p.p_value < 0.001);
        assert_eq!(p.bucket, Some(0.001));
        assert_eq!(p.stars, 3);
    }

    #[test]
    fn hand_computed_statistic() {
        // means 2, 4, 9; within SS = 2 + 2 + 2, df 6, MSE = 1
        let r = tukey_hsd(
            &[("a", vec![1.0, 2.0, 3.0]), ("b", vec![3.0, 4.0, 5.0]), ("c", vec![8.0, 9.0, 10.0])],
            &DEFAULT_ALPHAS,
        )
        .unwrap();
        assert_eq!(r.df_within, 6);
        assert!((r.mse - 1.0).abs() < 1e-15);
        let ab = r.pair("a", "b").unwrap();
        assert!((ab.q - 2.0 / (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.difference("a", "c"), Some(7.0));
        assert_eq!(r.difference("c", "a"), Some(-7.0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            tukey_hsd(&[("a", vec![1.0, 2.0])], &DEFAULT_ALPHAS),
            Err(StatsError::TooFewGroups(1))
        );
        assert!(matches!(
            tukey_hsd(&[("a", vec![1.0, 2.0]), ("b", vec![1.0])], &DEFAULT_ALPHAS),
            Err(StatsError::GroupTooSmall { size: 1, .. })
        ));
    }
}

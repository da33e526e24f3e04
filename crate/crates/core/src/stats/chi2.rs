use serde::{Deserialize, Serialize};

use super::special::chi2_sf;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: u64,
    pub cramers_v: f64,
    pub phi: f64,
}

impl ChiSquareResult {
    /// Effect sizes and p-value for a statistic computed elsewhere on a
    /// `rows x cols` table of `n` observations.
    pub fn from_statistic(chi2: f64, n: u64, rows: usize, cols: usize) -> Result<Self, StatsError> {
        if rows < 2 || cols < 2 {
            return Err(StatsError::TableShape { rows, cols });
        }
        if n == 0 {
            return Err(StatsError::ZeroMarginal);
        }
        let nf = n as f64;
        let m = (rows.min(cols) - 1) as f64;
        let df = (rows - 1) * (cols - 1);
        Ok(Self {
            chi2,
            df,
            p_value: chi2_sf(chi2, df as f64),
            n,
            cramers_v: (chi2 / (nf * m)).sqrt(),
            phi: (chi2 / nf).sqrt(),
        })
    }
}

/// Pearson chi-square test of independence on a contingency table.
pub fn chi_square_independence<R: AsRef<[u64]>>(table: &[R]) -> Result<ChiSquareResult, StatsError> {
    let rows = table.len();
    let cols = table.first().map_or(0, |r| r.as_ref().len());
    if rows < 2 || cols < 2 || table.iter().any(|r| r.as_ref().len() != cols) {
        return Err(StatsError::TableShape { rows, cols });
    }
    let row_sums: Vec<u64> = table.iter().map(|r| r.as_ref().iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r.as_ref()[j]).sum()).collect();
    if row_sums.contains(&0) || col_sums.contains(&0) {
        return Err(StatsError::ZeroMarginal);
    }
    let n: u64 = row_sums.iter().sum();
    let nf = n as f64;
    let mut chi2 = 0.0;
    for (r, rs) in table.iter().zip(&row_sums) {
        for (o, cs) in r.as_ref().iter().zip(&col_sums) {
            let e = *rs as f64 * *cs as f64 / nf;
            chi2 += (*o as f64 - e).powi(2) / e;
        }
    }
    ChiSquareResult::from_statistic(chi2, n, rows, cols)
}

//! Permutation ("parallel analysis") estimate of the number of latent
//! factors in a residual matrix.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{LeappError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RankConfig {
    pub n_permutations: usize,
    pub significance_threshold: f64,
    /// Largest rank considered; `None` means `min(rows, cols) - 1`.
    pub max_rank: Option<usize>,
    pub seed: u64,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            n_permutations: 20,
            significance_threshold: 0.1,
            max_rank: None,
            seed: 0,
        }
    }
}

impl RankConfig {
    fn check(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(LeappError::DegenerateMatrix("need at least one permutation".into()));
        }
        if !(self.significance_threshold > 0.0 && self.significance_threshold < 1.0) {
            return Err(LeappError::DegenerateMatrix(format!(
                "significance threshold {} outside (0, 1)",
                self.significance_threshold
            )));
        }
        Ok(())
    }
}

/// Estimates the number of significant factors of `r` (`N × m`).
///
/// Rows are centered and scaled to unit variance. The `i`-th observed
/// singular value is significant when it exceeds the `1 - threshold`
/// quantile of the `i`-th singular value over matrices whose rows were
/// permuted independently. The count stops at the first non-significant
/// index. Zero-variance rows are dropped with a warning.
pub fn parallel_analysis(r: &DMatrix<f64>, cfg: &RankConfig) -> Result<usize> {
    cfg.check()?;
    let m = r.ncols();
    if m < 2 {
        return Err(LeappError::DegenerateMatrix(format!("{m} columns")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(LeappError::NonFinite("residual matrix"));
    }
    let rows = standardized_rows(r);
    let dropped = r.nrows() - rows.len();
    if dropped > 0 {
        log::warn!("parallel analysis: dropped {dropped} zero-variance rows");
    }
    if rows.is_empty() {
        return Err(LeappError::DegenerateMatrix("every row has zero variance".into()));
    }
    let max_rank = cfg
        .max_rank
        .unwrap_or_else(|| rows.len().min(m).saturating_sub(1))
        .min(rows.len().min(m));
    if max_rank == 0 {
        return Ok(0);
    }

    let observed = singular_values(&to_matrix(&rows, m));
    let permuted: Vec<Vec<f64>> = (0..cfg.n_permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64 + 1);
            let mut shuffled = rows.clone();
            for row in &mut shuffled {
                row.shuffle(&mut rng);
            }
            singular_values(&to_matrix(&shuffled, m))
        })
        .collect();

    let level = 1.0 - cfg.significance_threshold;
    let mut k = 0;
    for i in 0..max_rank {
        let null: Vec<f64> = permuted.iter().map(|s| s[i]).collect();
        if observed[i] > quantile(&null, level) {
            k += 1;
        } else {
            break;
        }
    }
    Ok(k)
}

fn standardized_rows(r: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let m = r.ncols() as f64;
    r.row_iter()
        .filter_map(|row| {
            let mean = row.sum() / m;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let sd = var.sqrt();
            (sd > 1e-12 * (1.0 + mean.abs())).then(|| row.iter().map(|v| (v - mean) / sd).collect())
        })
        .collect()
}

fn to_matrix(rows: &[Vec<f64>], m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
}

/// Singular values in descending order via the smaller Gram matrix.
fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.ncols() <= a.nrows() {
        a.tr_mul(a)
    } else {
        a * a.transpose()
    };
    let mut vals: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Linearly interpolated empirical quantile (R's type 7).
fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

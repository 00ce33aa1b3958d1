//! Criss-cross regression on the primary-free block: alternate between
//! standardizing genes by their noise scale, regressing out covariates,
//! fitting a rank-`k` factor model, and re-estimating the noise scales.

use nalgebra::{DMatrix, DVector};

use crate::error::{LeappError, Result};
use crate::linalg::{fix_signs, gram_right_singular, row_sum_squares, RowRegression};
use crate::model::LatentEstimate;
use crate::rotation::RotatedData;

/// Noise scales are never allowed below this value.
pub const SIGMA_FLOOR: f64 = 1e-10;

/// Row-wise least-squares coefficients of `ys` (`N × m`) on the covariates
/// `xl` (`m × s`). Returns an `N × 0` matrix when `s = 0`.
pub fn regress_covariates(ys: &DMatrix<f64>, xl: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    RowRegression::fit(ys, xl)
        .map(|fit| fit.coef)
        .map_err(|e| match e {
            LeappError::SingularDesign => LeappError::RankDeficientCovariates,
            other => other,
        })
}

/// Best rank-`k` approximation `U_k V_kᵀ` of `e` (`N × m`).
///
/// `V_k` has orthonormal columns, the singular values are absorbed into
/// `U_k`, and each column of `V_k` has its largest-magnitude entry
/// positive.
pub fn truncated_svd(e: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n_rows, m) = e.shape();
    if k == 0 || k > n_rows.min(m) {
        return Err(LeappError::InvalidRank {
            rank: k,
            reason: format!("must lie in 1..={}", n_rows.min(m)),
        });
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(LeappError::NonFinite("matrix passed to truncated SVD"));
    }
    let mut v = if m <= n_rows {
        gram_right_singular(e, k).1
    } else {
        let svd = e.clone().svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| LeappError::NumericalFailure("SVD did not converge".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut v = DMatrix::zeros(m, k);
        for (c, &i) in order.iter().take(k).enumerate() {
            v.set_column(c, &v_t.row(i).transpose());
        }
        v
    };
    let mut u = e * &v;
    fix_signs(&mut v, &mut u);
    Ok((u, v))
}

/// Tuning for [`estimate_latent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrissCrossConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CrissCrossConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 100,
        }
    }
}

/// Fits `β`, `U`, `Σ` and `V⁽ℓ⁾` from the primary-free block.
///
/// Starting from `Σ̂ = I`, each sweep standardizes the rows by `Σ̂`,
/// regresses out the covariates, takes a rank-`k` truncated SVD of the
/// residual and sets `σ̂ᵢ² = ‖ε̂ᵢ‖² / (n - 1)` where `ε̂ = Σ̂ × (standardized
/// residual after the SVD)`. Iteration stops when the relative L1 change
/// of `σ̂` drops below `tol`; hitting `max_iter` is reported through
/// `converged = false`.
pub fn estimate_latent(
    rot: &RotatedData,
    k: usize,
    cfg: &CrissCrossConfig,
) -> Result<LatentEstimate> {
    let y = &rot.y_rest;
    let xl = &rot.x_rest;
    let (n_genes, m) = y.shape();
    let s = xl.ncols();
    if k == 0 || k > n_genes.min(m) {
        return Err(LeappError::InvalidRank {
            rank: k,
            reason: "criss-cross needs 1 <= k <= min(N, n - 1)".into(),
        });
    }
    if m <= s + k + 1 {
        return Err(LeappError::InsufficientDf(m as i64 - s as i64 - k as i64));
    }

    let mut sigma = DVector::from_element(n_genes, 1.0);
    let mut iterations = 0;
    let mut converged = false;
    let mut state;
    loop {
        iterations += 1;
        let ys = DMatrix::from_fn(n_genes, m, |i, j| y[(i, j)] / sigma[i]);
        let beta_s = regress_covariates(&ys, xl)?;
        let resid = if s == 0 { ys } else { ys - &beta_s * xl.transpose() };
        let (u_s, v) = truncated_svd(&resid, k)?;
        let leftover = resid - &u_s * v.transpose();
        let ss = row_sum_squares(&leftover);
        let new_sigma = DVector::from_fn(n_genes, |i, _| {
            let value = sigma[i] * (ss[i] / m as f64).sqrt();
            if value.is_finite() {
                value.max(SIGMA_FLOOR)
            } else {
                SIGMA_FLOOR
            }
        });
        let change = (&new_sigma - &sigma).abs().sum() / sigma.abs().sum();
        state = (beta_s, u_s, v);
        sigma = new_sigma;
        if change < cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
    }
    if !converged {
        log::warn!("criss-cross did not converge in {iterations} iterations");
    }
    let (beta_s, u_std_hat, v) = state;
    let floored: Vec<usize> = (0..n_genes).filter(|&i| sigma[i] <= SIGMA_FLOOR).collect();
    if !floored.is_empty() {
        log::warn!("{} noise scales clamped to {SIGMA_FLOOR}", floored.len());
    }
    let beta_hat = DMatrix::from_fn(n_genes, s, |i, j| sigma[i] * beta_s[(i, j)]);
    let u_hat = DMatrix::from_fn(n_genes, k, |i, j| sigma[i] * u_std_hat[(i, j)]);
    Ok(LatentEstimate {
        beta_hat,
        u_hat,
        u_std_hat,
        sigma_hat: sigma,
        v_rest_hat: v,
        k,
        iterations,
        converged,
        floored,
    })
}

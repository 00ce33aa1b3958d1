//! The complete LEAPP procedure: rotate, estimate the latent structure from
//! the primary-free columns, then test each gene as a mean-shift outlier in
//! the regression of the primary column on the estimated loadings.

use nalgebra::{DMatrix, DVector};

use crate::crisscross::{estimate_latent, regress_covariates, CrissCrossConfig, SIGMA_FLOOR};
use crate::error::{LeappError, Result};
use crate::ipod::{default_lambda_grid, mad_scale, select_lambda, tau_nonsparse, IpodFit, IpodOptions};
use crate::linalg::row_sum_squares;
use crate::model::{validate, DataMatrix, GeneResult, LatentEstimate, StudyDesign};
use crate::rank_estimate::{parallel_analysis, RankConfig};
use crate::rotation::{householder_for, rotate_and_split, RotatedData, RotationMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LeappConfig {
    /// Latent rank. Falls back to the design's `k`, then to parallel
    /// analysis when both are absent.
    pub k: Option<usize>,
    pub rank: RankConfig,
    /// `true`: `τ̂` is the MAD of the primary regression residuals.
    /// `false`: `τ̂` comes from the degrees-of-freedom formula.
    pub sparse_gamma: bool,
    pub crisscross: CrissCrossConfig,
    pub ipod: IpodOptions,
    /// Explicit penalty grid for Θ–IPOD; `None` uses the default grid.
    pub lambda_grid: Option<Vec<f64>>,
}

impl Default for LeappConfig {
    fn default() -> Self {
        Self {
            k: None,
            rank: RankConfig::default(),
            sparse_gamma: true,
            crisscross: CrissCrossConfig::default(),
            ipod: IpodOptions::default(),
            lambda_grid: None,
        }
    }
}

impl LeappConfig {
    pub fn with_rank(k: usize) -> Self {
        Self {
            k: Some(k),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeappFit {
    pub genes: GeneResult,
    pub latent: LatentEstimate,
    pub ipod: IpodFit,
    pub k_hat: usize,
    /// Whether `k_hat` came from parallel analysis.
    pub rank_estimated: bool,
}

pub fn leapp(y: &DataMatrix, d: &StudyDesign, cfg: &LeappConfig) -> Result<LeappFit> {
    leapp_with_rotation(y, d, cfg, None)
}

/// [`leapp`] with an explicit rotation. Any orthogonal `O` with `O g = e₁`
/// (for the normalized `g`) gives the same statistics up to rounding.
pub fn leapp_with_rotation(
    y: &DataMatrix,
    d: &StudyDesign,
    cfg: &LeappConfig,
    rotation: Option<&RotationMatrix>,
) -> Result<LeappFit> {
    validate(y, d)?;
    let d = d.normalized()?;
    let n = y.n_subjects();
    let s = d.n_covariates();
    let rot = match rotation {
        Some(o) => rotate_and_split(y, &d, o)?,
        None => rotate_and_split(y, &d, &householder_for(&d.g)?)?,
    };

    // n - s - k - 1 >= 2
    let k_max = n.saturating_sub(s + 3);
    let (k_hat, rank_estimated) = match cfg.k.or(d.k) {
        Some(k) if k > k_max => {
            return Err(LeappError::InsufficientDf(n as i64 - s as i64 - k as i64));
        }
        Some(k) => (k, false),
        None => (rank_from_rest(&rot, &cfg.rank, k_max)?, true),
    };

    let latent = if k_hat == 0 {
        covariates_only(&rot)?
    } else {
        estimate_latent(&rot, k_hat, &cfg.crisscross)?
    };

    let primary = primary_response(&rot, &latent);
    let loadings = &latent.u_std_hat;
    let grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => default_lambda_grid(&primary, loadings)?,
    };
    let ipod = select_lambda(&primary, loadings, &grid, &cfg.ipod)?;
    let resid = &primary - loadings * &ipod.coef;
    let tau = if cfg.sparse_gamma {
        mad_scale(resid.as_slice())?
    } else {
        tau_nonsparse(n, s, k_hat)?
    };
    let t = resid / tau;
    let genes = GeneResult::from_t_stats(t, Some(ipod.gamma.clone()), Some(tau));
    Ok(LeappFit {
        genes,
        latent,
        ipod,
        k_hat,
        rank_estimated,
    })
}

/// Latent rank chosen by parallel analysis on the primary-free columns
/// after the covariates are regressed out, as [`leapp`] does when no rank
/// is given. Useful for giving the baselines the same rank.
pub fn estimate_rank(y: &DataMatrix, d: &StudyDesign, cfg: &RankConfig) -> Result<usize> {
    validate(y, d)?;
    let d = d.normalized()?;
    let rot = rotate_and_split(y, &d, &householder_for(&d.g)?)?;
    rank_from_rest(&rot, cfg, y.n_subjects().saturating_sub(d.n_covariates() + 3))
}

fn rank_from_rest(rot: &RotatedData, cfg: &RankConfig, k_max: usize) -> Result<usize> {
    let beta0 = regress_covariates(&rot.y_rest, &rot.x_rest)?;
    let resid = if rot.n_covariates() == 0 {
        rot.y_rest.clone()
    } else {
        &rot.y_rest - beta0 * rot.x_rest.transpose()
    };
    let k = parallel_analysis(&resid, cfg)?;
    if k > k_max {
        log::warn!("estimated rank {k} capped at {k_max}");
    }
    Ok(k.min(k_max))
}

/// `(Y⁽ʳ⁾ᵢ₁ - β̂ᵢᵀ X⁽ʳ⁾₁) / σ̂ᵢ`.
fn primary_response(rot: &RotatedData, latent: &LatentEstimate) -> DVector<f64> {
    let offset = &latent.beta_hat * &rot.x_first;
    DVector::from_fn(rot.n_genes(), |i, _| {
        (rot.y_first[i] - offset[i]) / latent.sigma_hat[i]
    })
}

/// Rank-zero fit: only the covariates are regressed out and the noise
/// scale is the residual root mean square over the `n - 1` columns.
fn covariates_only(rot: &RotatedData) -> Result<LatentEstimate> {
    let n_genes = rot.n_genes();
    let m = rot.n_rest();
    let beta_hat = regress_covariates(&rot.y_rest, &rot.x_rest)?;
    let resid = if rot.n_covariates() == 0 {
        rot.y_rest.clone()
    } else {
        &rot.y_rest - &beta_hat * rot.x_rest.transpose()
    };
    let ss = row_sum_squares(&resid);
    let sigma_hat = ss.map(|v| (v / m as f64).sqrt().max(SIGMA_FLOOR));
    let floored = (0..n_genes).filter(|&i| sigma_hat[i] <= SIGMA_FLOOR).collect();
    Ok(LatentEstimate {
        beta_hat,
        u_hat: DMatrix::zeros(n_genes, 0),
        u_std_hat: DMatrix::zeros(n_genes, 0),
        sigma_hat,
        v_rest_hat: DMatrix::zeros(m, 0),
        k: 0,
        iterations: 0,
        converged: true,
        floored,
    })
}

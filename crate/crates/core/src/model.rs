//! Domain types for the model `Y = γ gᵀ + β Xᵀ + U Vᵀ + Σ E`.

use nalgebra::{DMatrix, DVector};

use crate::error::{LeappError, Result};
use crate::linalg::{has_full_column_rank, two_sided_normal_p};

/// Smallest number of subjects the pipeline can work with.
pub const MIN_SUBJECTS: usize = 4;

/// Response matrix with genes in rows and subjects in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 1 {
            return Err(LeappError::DegenerateDesign("no genes".into()));
        }
        if values.ncols() < MIN_SUBJECTS {
            return Err(LeappError::DegenerateDesign(format!(
                "need at least {MIN_SUBJECTS} subjects, got {}",
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LeappError::NonFinite("response matrix"));
        }
        Ok(Self { values })
    }

    /// Builds the matrix from gene rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(LeappError::DimensionMismatch(format!(
                "row {} has {} values, expected {n}",
                i + 1,
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_subjects(&self) -> usize {
        self.values.ncols()
    }
}

/// Primary variable, covariates and (optionally) the latent rank.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDesign {
    pub g: DVector<f64>,
    /// `n × s` covariates; `s = 0` is allowed.
    pub x: DMatrix<f64>,
    /// Latent rank; `None` asks for it to be estimated.
    pub k: Option<usize>,
}

impl StudyDesign {
    pub fn new(g: DVector<f64>, x: Option<DMatrix<f64>>, k: Option<usize>) -> Self {
        let n = g.len();
        Self {
            x: x.unwrap_or_else(|| DMatrix::zeros(n, 0)),
            g,
            k,
        }
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    /// Copy with `g` scaled to unit Euclidean norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.g.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LeappError::ZeroVector);
        }
        Ok(Self {
            g: &self.g / norm,
            ..self.clone()
        })
    }

    /// Copy with `g` centered to mean zero and then scaled to unit norm.
    pub fn centered_normalized(&self) -> Result<Self> {
        let mean = self.g.mean();
        Self {
            g: self.g.add_scalar(-mean),
            ..self.clone()
        }
        .normalized()
    }
}

/// Checks that `y` and `d` are dimensionally consistent and non-degenerate.
pub fn validate(y: &DataMatrix, d: &StudyDesign) -> Result<()> {
    let n = y.n_subjects();
    if d.g.len() != n {
        return Err(LeappError::DimensionMismatch(format!(
            "primary variable has length {} but data have {n} subjects",
            d.g.len()
        )));
    }
    if d.x.nrows() != n {
        return Err(LeappError::DimensionMismatch(format!(
            "covariates have {} rows but data have {n} subjects",
            d.x.nrows()
        )));
    }
    if d.g.iter().chain(d.x.iter()).any(|v| !v.is_finite()) {
        return Err(LeappError::NonFinite("design"));
    }
    if !(d.g.norm() > 0.0) {
        return Err(LeappError::ZeroVector);
    }
    let s = d.n_covariates();
    if s + 3 > n {
        return Err(LeappError::DegenerateDesign(format!(
            "{s} covariates leave too few subjects ({n})"
        )));
    }
    if !has_full_column_rank(&d.x) {
        return Err(LeappError::RankDeficientCovariates);
    }
    if let Some(k) = d.k {
        if k + s + 2 > n {
            return Err(LeappError::InvalidRank {
                rank: k,
                reason: format!("must be at most n - s - 2 = {}", n - s - 2),
            });
        }
    }
    Ok(())
}

/// Latent structure fitted from the primary-free columns.
#[derive(Debug, Clone)]
pub struct LatentEstimate {
    /// `N × s` covariate coefficients on the data scale.
    pub beta_hat: DMatrix<f64>,
    /// `N × k` latent loadings on the data scale (`Σ̂ Û⁽ˢ⁾`).
    pub u_hat: DMatrix<f64>,
    /// `N × k` loadings on the standardized scale.
    pub u_std_hat: DMatrix<f64>,
    /// Per-gene noise scale, strictly positive.
    pub sigma_hat: DVector<f64>,
    /// `(n-1) × k` with orthonormal columns.
    pub v_rest_hat: DMatrix<f64>,
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Genes whose noise scale was clamped to the floor.
    pub floored: Vec<usize>,
}

/// Per-gene test statistics and the induced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneResult {
    pub t_stat: DVector<f64>,
    pub p_value: DVector<f64>,
    /// Mean-shift estimates on the standardized scale (LEAPP only).
    pub gamma_hat: Option<DVector<f64>>,
    /// Residual scale used to form the statistics (LEAPP only).
    pub tau_hat: Option<f64>,
    /// `rank[i]` is the 1-based position of gene `i`; 1 is most significant.
    pub rank: Vec<usize>,
}

impl GeneResult {
    pub fn from_t_stats(
        t_stat: DVector<f64>,
        gamma_hat: Option<DVector<f64>>,
        tau_hat: Option<f64>,
    ) -> Self {
        let p_value = t_stat.map(two_sided_normal_p);
        let rank = rank_by_magnitude(t_stat.as_slice());
        Self {
            t_stat,
            p_value,
            gamma_hat,
            tau_hat,
            rank,
        }
    }

    pub fn n_genes(&self) -> usize {
        self.t_stat.len()
    }

    /// `|T|`, the score used for ranking and evaluation.
    pub fn scores(&self) -> Vec<f64> {
        self.t_stat.iter().map(|t| t.abs()).collect()
    }
}

/// 1-based ranks by descending `|t|`; ties go to the lower index. `NaN`
/// statistics rank last.
pub fn rank_by_magnitude(t: &[f64]) -> Vec<usize> {
    let key = |v: f64| if v.is_nan() { -1.0 } else { v.abs() };
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| key(t[b]).total_cmp(&key(t[a])).then(a.cmp(&b)));
    let mut rank = vec![0; t.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    rank
}

/// Ground truth of a simulated data set.
#[derive(Debug, Clone)]
pub struct SimTruth {
    pub gamma: DVector<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub nonnull_mask: Vec<bool>,
}

impl SimTruth {
    /// The latent contribution `U Vᵀ`.
    pub fn latent(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }
}

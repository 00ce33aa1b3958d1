//! Comparator methods: plain regression on the primary variable, an oracle
//! that is handed the latent term, EIGENSTRAT-style principal component
//! adjustment, and iteratively reweighted surrogate variable analysis.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::crisscross::truncated_svd;
use crate::error::{LeappError, Result};
use crate::linalg::{hcat, two_sided_normal_p, RowRegression};
use crate::model::{validate, DataMatrix, GeneResult, StudyDesign};

/// Per-gene regression on `(g, X)` ignoring any latent structure.
pub fn raw_regress(y: &DataMatrix, d: &StudyDesign) -> Result<GeneResult> {
    validate(y, d)?;
    let d = d.normalized()?;
    let g = DMatrix::from_column_slice(d.g.len(), 1, d.g.as_slice());
    primary_t_stats(y.values(), &hcat(&[&g, &d.x]))
}

/// [`raw_regress`] applied to `Y - latent`, where `latent` is the true
/// `U Vᵀ` (`N × n`).
pub fn oracle_regress(y: &DataMatrix, d: &StudyDesign, latent: &DMatrix<f64>) -> Result<GeneResult> {
    if latent.shape() != y.values().shape() {
        return Err(LeappError::DimensionMismatch(format!(
            "latent term is {:?}, data are {:?}",
            latent.shape(),
            y.values().shape()
        )));
    }
    raw_regress(&DataMatrix::new(y.values() - latent)?, d)
}

/// Principal component adjustment: the top `k` right singular vectors of
/// the row-centered data join `(g, X)` as regressors.
pub fn eigenstrat(y: &DataMatrix, d: &StudyDesign, k: usize) -> Result<GeneResult> {
    validate(y, d)?;
    check_rank(y, d, k)?;
    let d = d.normalized()?;
    let v_hat = top_right_vectors(&row_centered(y.values()), k)?;
    let g = DMatrix::from_column_slice(d.g.len(), 1, d.g.as_slice());
    primary_t_stats(y.values(), &hcat(&[&g, &d.x, &v_hat]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvaOptions {
    pub max_outer: usize,
    pub tol: f64,
}

impl Default for SvaOptions {
    fn default() -> Self {
        Self {
            max_outer: 20,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvaFit {
    pub genes: GeneResult,
    /// Final per-gene weights, estimates of `Pr(γᵢ = 0, Uᵢ ≠ 0 | data)`.
    pub weights: DVector<f64>,
    /// `n × k` surrogate variables.
    pub v_hat: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iteratively reweighted surrogate variable analysis with `k` surrogate
/// variables.
///
/// The initial surrogates are the top right singular vectors of the
/// row-centered residuals from the raw regression. Each sweep then weights
/// gene `i` by `(1 - Pr(γᵢ ≠ 0)) · Pr(Uᵢ ≠ 0)`, both posterior
/// probabilities coming from [`local_fdr`] (see [`surrogate_weights`]),
/// and refreshes the surrogates from
/// the SVD of the weighted, row-centered data.
pub fn sva(y: &DataMatrix, d: &StudyDesign, k: usize, opts: &SvaOptions) -> Result<SvaFit> {
    validate(y, d)?;
    check_rank(y, d, k)?;
    let d = d.normalized()?;
    let values = y.values();
    let g = DMatrix::from_column_slice(d.g.len(), 1, d.g.as_slice());
    let base = hcat(&[&g, &d.x]);

    let raw = RowRegression::fit(values, &base)?;
    let mut v_hat = top_right_vectors(&row_centered(&raw.residuals), k)?;
    let mut weights = DVector::from_element(values.nrows(), 1.0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_outer {
        iterations += 1;
        weights = surrogate_weights(values, &base, &v_hat)?;
        if weights.amax() <= 0.0 {
            log::warn!("all surrogate weights vanished; keeping previous surrogates");
            break;
        }
        let weighted = DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
            weights[i] * values[(i, j)]
        });
        let mut next = top_right_vectors(&row_centered(&weighted), k)?;
        for c in 0..k {
            if next.column(c).dot(&v_hat.column(c)) < 0.0 {
                next.column_mut(c).neg_mut();
            }
        }
        let change = (&next - &v_hat).norm();
        v_hat = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let genes = primary_t_stats(values, &hcat(&[&base, &v_hat]))?;
    Ok(SvaFit {
        genes,
        weights,
        v_hat,
        iterations,
        converged,
    })
}

fn check_rank(y: &DataMatrix, d: &StudyDesign, k: usize) -> Result<()> {
    let limit = y.n_subjects() as i64 - d.n_covariates() as i64 - 2;
    if k == 0 || k as i64 > limit {
        return Err(LeappError::InvalidRank {
            rank: k,
            reason: format!("must lie in 1..={limit}"),
        });
    }
    Ok(())
}

fn row_centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = m.column_mean();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[i])
}

fn top_right_vectors(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    truncated_svd(m, k).map(|(_, v)| v)
}

/// T statistics of the first design column with normal-reference p-values.
fn primary_t_stats(y: &DMatrix<f64>, design: &DMatrix<f64>) -> Result<GeneResult> {
    let df = y.ncols() - design.ncols();
    let fit = RowRegression::fit(y, design)?;
    Ok(GeneResult::from_t_stats(fit.t_stats(0, df)?, None, None))
}

/// `(1 - Pr(γᵢ ≠ 0)) · Pr(Uᵢ ≠ 0)` for every gene, given surrogates `v_hat`.
///
/// `base` is `(g, X)`. The primary p-values test `g` in the regression on
/// `(g, X, V̂)`; the latent p-values are F tests of `(X, V̂)` against `X`,
/// leaving `g` out of both models.
pub fn surrogate_weights(
    y: &DMatrix<f64>,
    base: &DMatrix<f64>,
    v_hat: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let full_design = hcat(&[base, v_hat]);
    let df = y.ncols() - full_design.ncols();
    let full = RowRegression::fit(y, &full_design)?;
    let p_primary: Vec<f64> = full.t_stats(0, df)?.iter().map(|&t| two_sided_normal_p(t)).collect();

    let x = base.columns(1, base.ncols() - 1).into_owned();
    let latent_design = hcat(&[&x, v_hat]);
    let k = v_hat.ncols();
    let df_latent = y.ncols() - latent_design.ncols();
    let rss_latent = RowRegression::fit(y, &latent_design)?.rss();
    let rss_null = RowRegression::fit(y, &x)?.rss();
    let f_dist = FisherSnedecor::new(k as f64, df_latent as f64)
        .map_err(|e| LeappError::NumericalFailure(e.to_string()))?;
    let p_latent: Vec<f64> = (0..y.nrows())
        .map(|i| {
            let f = ((rss_null[i] - rss_latent[i]).max(0.0) / k as f64) / (rss_latent[i] / df_latent as f64);
            if f.is_nan() {
                1.0
            } else if f.is_infinite() {
                0.0
            } else {
                f_dist.sf(f)
            }
        })
        .collect();

    let null_primary = local_fdr(&p_primary);
    let null_latent = local_fdr(&p_latent);
    Ok(DVector::from_fn(y.nrows(), |i, _| null_primary[i] * (1.0 - null_latent[i])))
}

/// Local false discovery rates `min(1, π̂₀ / f̂(p))` with Storey's `π̂₀` at
/// `λ = 0.5` and `f̂` a 20-bin histogram density of the p-values.
pub fn local_fdr(p: &[f64]) -> Vec<f64> {
    const BINS: usize = 20;
    let n = p.len() as f64;
    let pi0 = (p.iter().filter(|&&v| v > 0.5).count() as f64 / (0.5 * n)).min(1.0);
    let bin = |v: f64| ((v * BINS as f64) as usize).min(BINS - 1);
    let mut counts = [0usize; BINS];
    for &v in p {
        counts[bin(v)] += 1;
    }
    p.iter()
        .map(|&v| {
            let density = counts[bin(v)] as f64 / (n / BINS as f64);
            (pi0 / density).min(1.0)
        })
        .collect()
}

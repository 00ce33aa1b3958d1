//! Θ–IPOD: regression with sparse mean-shift outliers fitted by iterated
//! hard thresholding, with the penalty chosen by an extended BIC.

use nalgebra::{DMatrix, DVector};

use crate::error::{LeappError, Result};
use crate::linalg::median;

/// Consistency constant of the MAD for the Gaussian.
pub const MAD_SCALE: f64 = 1.4826;
/// `γ` parameter of the extended BIC.
pub const EBIC_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IpodFit {
    /// Regression coefficients, length `k`.
    pub coef: DVector<f64>,
    /// Mean-shift estimates, length `N`.
    pub gamma: DVector<f64>,
    pub lambda: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl IpodFit {
    pub fn support(&self) -> Vec<usize> {
        self.gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.gamma.iter().filter(|&&g| g != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpodOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpodOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

pub fn hard_threshold(x: &DVector<f64>, lambda: f64) -> DVector<f64> {
    x.map(|v| if v.abs() > lambda { v } else { 0.0 })
}

/// Orthogonal projection onto the column space of `U`, kept in factored
/// form so that applying it costs `O(N k)`.
struct Projector {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Projector {
    fn new(u: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = u.shape();
        if k >= n {
            return Err(LeappError::SingularDesign);
        }
        if k == 0 {
            return Ok(Self {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            });
        }
        let qr = u.clone().qr();
        let r = qr.r();
        for j in 0..k {
            if !(r[(j, j)].abs() > 1e-10 * u.column(j).norm()) {
                return Err(LeappError::SingularDesign);
            }
        }
        Ok(Self { q: qr.q(), r })
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.q.ncols() == 0 {
            return DVector::zeros(v.len());
        }
        &self.q * self.q.tr_mul(v)
    }

    fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.q.ncols() == 0 {
            return DVector::zeros(0);
        }
        self.r
            .solve_upper_triangular(&self.q.tr_mul(v))
            .expect("triangular factor checked nonsingular")
    }
}

/// Θ–IPOD at a fixed `lambda`, starting from `γ = 0`.
///
/// Iterates `γ ← Θ(Hγ + (I - H)y; λ)` with `H` the hat matrix of `u`
/// until the sup-norm change falls below `opts.tol`, then fits the
/// coefficients by least squares on `y - γ`.
pub fn theta_ipod(
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    lambda: f64,
    opts: &IpodOptions,
) -> Result<IpodFit> {
    check_inputs(y, u)?;
    let proj = Projector::new(u)?;
    let start = DVector::zeros(y.len());
    Ok(fit_from(y, &proj, lambda, start, opts))
}

fn check_inputs(y: &DVector<f64>, u: &DMatrix<f64>) -> Result<()> {
    if u.nrows() != y.len() {
        return Err(LeappError::DimensionMismatch(format!(
            "response has {} entries, predictors have {} rows",
            y.len(),
            u.nrows()
        )));
    }
    if y.iter().chain(u.iter()).any(|v| !v.is_finite()) {
        return Err(LeappError::NonFinite("IPOD input"));
    }
    Ok(())
}

fn fit_from(
    y: &DVector<f64>,
    proj: &Projector,
    lambda: f64,
    mut gamma: DVector<f64>,
    opts: &IpodOptions,
) -> IpodFit {
    let resid_y = y - proj.project(y);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = hard_threshold(&(proj.project(&gamma) + &resid_y), lambda);
        let change = (&next - &gamma).amax();
        gamma = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let target = y - &gamma;
    let coef = proj.coefficients(&target);
    let resid = &target - proj.project(&target);
    let bic = extended_bic(resid.norm_squared(), y.len(), support_size(&gamma));
    IpodFit {
        coef,
        gamma,
        lambda,
        bic,
        iterations,
        converged,
    }
}

fn support_size(gamma: &DVector<f64>) -> usize {
    gamma.iter().filter(|&&g| g != 0.0).count()
}

/// `N log(RSS/N) + |S| (log N + 2 γ_EBIC log N)`, the extended BIC with the
/// `log C(N, |S|)` term replaced by `|S| log N`.
fn extended_bic(rss: f64, n: usize, support: usize) -> f64 {
    let nf = n as f64;
    let rss = rss.max(f64::MIN_POSITIVE * nf);
    nf * (rss / nf).ln() + support as f64 * (1.0 + 2.0 * EBIC_GAMMA) * nf.ln()
}

/// Fits along `grid` (processed from the largest `λ` down, each fit warm
/// started from the previous one) and returns the fit with the smallest
/// extended BIC among those flagging at most `N/2` outliers.
pub fn select_lambda(
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    grid: &[f64],
    opts: &IpodOptions,
) -> Result<IpodFit> {
    if grid.is_empty() {
        return Err(LeappError::EmptyGrid);
    }
    if grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(LeappError::DegenerateDesign("lambda values must be positive".into()));
    }
    check_inputs(y, u)?;
    let proj = Projector::new(u)?;
    let mut lambdas = grid.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));

    let n = y.len();
    let mut best: Option<IpodFit> = None;
    let mut first: Option<IpodFit> = None;
    let mut warm = DVector::zeros(n);
    for &lambda in &lambdas {
        let fit = fit_from(y, &proj, lambda, warm.clone(), opts);
        warm.copy_from(&fit.gamma);
        let eligible = 2 * fit.support_size() <= n;
        if eligible && best.as_ref().is_none_or(|b| fit.bic < b.bic) {
            best = Some(fit.clone());
        }
        if first.is_none() {
            first = Some(fit);
        }
    }
    Ok(best.or(first).expect("grid is nonempty"))
}

/// Default penalty grid: 40 log-spaced values from 5 to 0.5 times the MAD
/// scale of the least-squares residuals.
pub fn default_lambda_grid(y: &DVector<f64>, u: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_inputs(y, u)?;
    let proj = Projector::new(u)?;
    let resid = y - proj.project(y);
    let scale = match mad_scale(resid.as_slice()) {
        Ok(s) => s,
        Err(_) => {
            let m = resid.amax();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    Ok(log_grid(5.0 * scale, 0.5 * scale, 40))
}

fn log_grid(hi: f64, lo: f64, len: usize) -> Vec<f64> {
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..len)
        .map(|i| (lh + (ll - lh) * i as f64 / (len - 1) as f64).exp())
        .collect()
}

/// `1.4826 × median(|r - median(r)|)`.
pub fn mad_scale(r: &[f64]) -> Result<f64> {
    if r.len() < 2 {
        return Err(LeappError::DegenerateDesign("MAD needs at least two values".into()));
    }
    let center = median(r);
    let deviations: Vec<f64> = r.iter().map(|v| (v - center).abs()).collect();
    let mad = MAD_SCALE * median(&deviations);
    if mad > 0.0 {
        Ok(mad)
    } else {
        Err(LeappError::ZeroSpread)
    }
}

/// Residual scale for non-sparse effects, `sqrt((n-s-k-1)/(n-s-k-3))`.
pub fn tau_nonsparse(n: usize, s: usize, k: usize) -> Result<f64> {
    let free = n as i64 - s as i64 - k as i64;
    if free <= 3 {
        return Err(LeappError::InsufficientDf(free));
    }
    Ok(((free - 1) as f64 / (free - 3) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_threshold_definition() {
        let x = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        assert_eq!(hard_threshold(&x, 1.0), DVector::from_vec(vec![0.0, -2.0, 0.0]));
        assert_eq!(hard_threshold(&x, 5.0), DVector::zeros(3));
    }

    #[test]
    fn no_outliers_recovers_coefficients() {
        let u = DMatrix::from_fn(30, 2, |i, j| ((i * (j + 3)) % 7) as f64 - 3.0 + j as f64 * 0.1);
        let v = DVector::from_vec(vec![1.5, -0.75]);
        let y = &u * &v;
        let fit = theta_ipod(&y, &u, 0.3, &IpodOptions::default()).unwrap();
        assert_eq!(fit.support_size(), 0);
        assert!((fit.coef - v).amax() < 1e-8);
    }

    #[test]
    fn tiny_lambda_saturates_residuals() {
        let u = DMatrix::from_fn(20, 1, |i, _| i as f64 - 9.5);
        let y = DVector::from_fn(20, |i, _| ((i * 7) % 5) as f64);
        let fit = theta_ipod(&y, &u, 1e-9, &IpodOptions::default()).unwrap();
        assert!(fit.converged);
        let resid = &y - &u * &fit.coef - &fit.gamma;
        assert!(resid.amax() < 1e-6);
    }

    #[test]
    fn empty_grid_rejected() {
        let u = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::zeros(5);
        assert_eq!(
            select_lambda(&y, &u, &[], &IpodOptions::default()).unwrap_err(),
            LeappError::EmptyGrid
        );
    }

    #[test]
    fn singular_predictors_rejected() {
        let u = DMatrix::from_element(5, 2, 1.0);
        let y = DVector::zeros(5);
        assert_eq!(
            theta_ipod(&y, &u, 1.0, &IpodOptions::default()).unwrap_err(),
            LeappError::SingularDesign
        );
    }

    #[test]
    fn mad_of_constant_majority_is_zero_spread() {
        assert_eq!(mad_scale(&[1.0, 1.0, 1.0, 5.0]), Err(LeappError::ZeroSpread));
    }

    #[test]
    fn mad_scale_equivariance() {
        let r = [0.3, -1.2, 2.5, 0.7, -0.1];
        let base = mad_scale(&r).unwrap();
        let scaled: Vec<f64> = r.iter().map(|v| -3.0 * v).collect();
        assert!((mad_scale(&scaled).unwrap() - 3.0 * base).abs() < 1e-12);
    }

    #[test]
    fn tau_nonsparse_values() {
        assert!((tau_nonsparse(60, 0, 1).unwrap() - (58.0f64 / 56.0).sqrt()).abs() < 1e-15);
        assert!((tau_nonsparse(60, 0, 1).unwrap() - 1.01770).abs() < 1e-5);
        assert!((tau_nonsparse(1_000_000, 0, 1).unwrap() - 1.0).abs() < 1e-5);
        // n - s - k = 4 leaves one degree of freedom in the denominator.
        assert!((tau_nonsparse(5, 0, 1).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(tau_nonsparse(4, 0, 1), Err(LeappError::InsufficientDf(3)));
    }

    #[test]
    fn default_grid_shape() {
        let u = DMatrix::from_fn(50, 1, |i, _| (i as f64).sin());
        let y = DVector::from_fn(50, |i, _| (i as f64 * 1.7).cos());
        let grid = default_lambda_grid(&y, &u).unwrap();
        assert_eq!(grid.len(), 40);
        assert!((grid[0] / grid[39] - 10.0).abs() < 1e-9);
        assert!(grid.windows(2).all(|w| w[0] > w[1]));
    }
}

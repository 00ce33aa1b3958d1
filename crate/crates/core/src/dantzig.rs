//! Dantzig-selector estimate of the sparse effects after projecting out a
//! single latent direction:
//!
//! ```text
//! minimize ‖γ‖₁  subject to  ‖(I − u uᵀ)(y − γ)‖∞ ≤ σ √(log N)
//! ```
//!
//! Solved as a linear program in `γ⁺, γ⁻ ≥ 0`. The projection is carried by
//! one auxiliary variable `z = uᵀγ`, so every box constraint touches only
//! `γᵢ` and `z`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DVector;

use crate::error::{LeappError, Result};

/// Slack allowed on the box constraints when checking the returned point.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DantzigResult {
    pub gamma_hat: DVector<f64>,
    /// Order-statistic bound `Σ_{i≤2s} u²₍ᵢ₎ + ½ Σ_{i≤3s} u²₍ᵢ₎`.
    pub b: f64,
    /// Whether the returned point satisfies the constraint to
    /// [`FEASIBILITY_TOL`].
    pub feasible: bool,
}

/// `Σ_{i≤2s} u²₍ᵢ₎ + ½ Σ_{i≤3s} u²₍ᵢ₎` over the entries of `u` sorted by
/// decreasing magnitude.
pub fn bound_b(u: &DVector<f64>, s: usize) -> f64 {
    let mut sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let head = |m: usize| sq.iter().take(m).sum::<f64>();
    head(2 * s) + 0.5 * head(3 * s)
}

/// Right-hand side `16 σ² s log N / ((1 − ρ²)(1 − B)²)` of the error bound.
/// `None` when `B ≥ 1`, where the bound says nothing.
pub fn error_bound(sigma: f64, s: usize, n_genes: usize, rho: f64, b: f64) -> Option<f64> {
    (b < 1.0).then(|| {
        16.0 * sigma * sigma * s as f64 * (n_genes as f64).ln() / ((1.0 - rho * rho) * (1.0 - b).powi(2))
    })
}

/// `‖(I − u uᵀ)(y − γ)‖∞`.
pub fn constraint_violation(y: &DVector<f64>, u: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
    let r = y - gamma;
    (&r - u * u.dot(&r)).amax()
}

pub fn dantzig_gamma(y1: &DVector<f64>, u_star: &DVector<f64>, sigma: f64, s_assumed: usize) -> Result<DantzigResult> {
    let n_genes = y1.len();
    if n_genes < 2 {
        return Err(LeappError::DimensionMismatch(format!("need N >= 2, got {n_genes}")));
    }
    if u_star.len() != n_genes {
        return Err(LeappError::DimensionMismatch(format!(
            "direction has {} entries, response has {n_genes}",
            u_star.len()
        )));
    }
    if (u_star.norm() - 1.0).abs() > 1e-10 {
        return Err(LeappError::NotUnitVector(u_star.norm()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LeappError::DegenerateDesign(format!("sigma = {sigma} must be positive")));
    }
    if y1.iter().any(|v| !v.is_finite()) {
        return Err(LeappError::NonFinite("response"));
    }

    let radius = sigma * (n_genes as f64).ln().sqrt();
    let py = y1 - u_star * u_star.dot(y1);

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let plus: Vec<_> = (0..n_genes).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let minus: Vec<_> = (0..n_genes).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let z = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));

    // z − uᵀ(γ⁺ − γ⁻) = 0
    let mut link = vec![(z, 1.0)];
    for i in 0..n_genes {
        link.push((plus[i], -u_star[i]));
        link.push((minus[i], u_star[i]));
    }
    lp.add_constraint(link.as_slice(), ComparisonOp::Eq, 0.0);
    // (Pγ)ᵢ = γᵢ − uᵢ z must stay within radius of (P y)ᵢ.
    for i in 0..n_genes {
        let row = [(plus[i], 1.0), (minus[i], -1.0), (z, -u_star[i])];
        lp.add_constraint(&row[..], ComparisonOp::Le, py[i] + radius);
        lp.add_constraint(&row[..], ComparisonOp::Ge, py[i] - radius);
    }

    let solution = match lp.solve() {
        Ok(outcome) => outcome
            .into_solution()
            .map_err(|e| LeappError::NumericalFailure(format!("{e:?}")))?,
        Err(microlp::Error::Infeasible) => return Err(LeappError::Infeasible),
        Err(e) => return Err(LeappError::NumericalFailure(e.to_string())),
    };
    let gamma_hat = DVector::from_fn(n_genes, |i, _| {
        solution.var_value(plus[i]) - solution.var_value(minus[i])
    });
    let feasible = constraint_violation(y1, u_star, &gamma_hat) <= radius + FEASIBILITY_TOL;
    Ok(DantzigResult {
        gamma_hat,
        b: bound_b(u_star, s_assumed),
        feasible,
    })
}

use nalgebra::{DMatrix, DVector};

use crate::error::{LeappError, Result};

/// Relative size below which a pivot of a QR factorization counts as zero.
const RANK_TOL: f64 = 1e-10;

/// Row-wise least squares of every row of a response matrix on a shared
/// design matrix.
#[derive(Debug, Clone)]
pub(crate) struct RowRegression {
    /// `N × p` coefficients, one row per response row.
    pub coef: DMatrix<f64>,
    /// `N × n` residuals.
    pub residuals: DMatrix<f64>,
    /// `(DᵀD)⁻¹`, `p × p`.
    pub unscaled_cov: DMatrix<f64>,
}

impl RowRegression {
    /// Fits each row of `y` (`N × n`) on `design` (`n × p`).
    pub fn fit(y: &DMatrix<f64>, design: &DMatrix<f64>) -> Result<Self> {
        let (n_rows, n_cols) = y.shape();
        if design.nrows() != n_cols {
            return Err(LeappError::DimensionMismatch(format!(
                "design has {} rows but response has {} columns",
                design.nrows(),
                n_cols
            )));
        }
        let p = design.ncols();
        if p == 0 {
            return Ok(Self {
                coef: DMatrix::zeros(n_rows, 0),
                residuals: y.clone(),
                unscaled_cov: DMatrix::zeros(0, 0),
            });
        }
        if p > n_cols {
            return Err(LeappError::SingularDesign);
        }
        let r_inv = upper_factor_inverse(design)?;
        // (DᵀD)⁻¹ = R⁻¹ R⁻ᵀ and the coefficients are Y D (DᵀD)⁻¹.
        let unscaled_cov = &r_inv * r_inv.transpose();
        let coef = (y * design) * &unscaled_cov;
        let residuals = y - &coef * design.transpose();
        Ok(Self {
            coef,
            residuals,
            unscaled_cov,
        })
    }

    /// Residual sum of squares per row.
    pub fn rss(&self) -> DVector<f64> {
        row_sum_squares(&self.residuals)
    }

    /// Normal-reference t statistics for coefficient column `j`, using the
    /// residual variance on `df` degrees of freedom.
    pub fn t_stats(&self, j: usize, df: usize) -> Result<DVector<f64>> {
        if df == 0 {
            return Err(LeappError::InsufficientDf(0));
        }
        let c = self.unscaled_cov[(j, j)];
        let rss = self.rss();
        Ok(DVector::from_fn(self.coef.nrows(), |i, _| {
            let s2 = rss[i] / df as f64;
            self.coef[(i, j)] / (s2 * c).sqrt()
        }))
    }
}

/// Inverse of the triangular factor `R` of a thin QR of `design`, after
/// checking that the design has full column rank.
fn upper_factor_inverse(design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = design.ncols();
    let r = design.clone().qr().r();
    for j in 0..p {
        let col_norm = design.column(j).norm();
        if !(r[(j, j)].abs() > RANK_TOL * col_norm) {
            return Err(LeappError::SingularDesign);
        }
    }
    r.solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(LeappError::SingularDesign)
}

/// True when the columns of `m` are linearly independent.
pub(crate) fn has_full_column_rank(m: &DMatrix<f64>) -> bool {
    m.ncols() == 0 || (m.ncols() <= m.nrows() && upper_factor_inverse(m).is_ok())
}

pub(crate) fn row_sum_squares(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| m.row(i).norm_squared())
}

/// Singular values of `m` in descending order together with the top `k`
/// right singular vectors (`ncols × k`), computed from the eigen
/// decomposition of `mᵀm`.
///
/// Only used where `ncols ≤ nrows` and the leading directions matter; the
/// reconstruction `m V Vᵀ` is exact for `k = ncols` regardless of the
/// eigen solver accuracy because `V` is orthogonal.
pub(crate) fn gram_right_singular(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let gram = m.tr_mul(m);
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    let mut v = DMatrix::zeros(m.ncols(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, v)
}

/// Flips the sign of each column so that its largest-magnitude entry is
/// positive, applying the same flip to the paired columns of `partner`.
pub(crate) fn fix_signs(v: &mut DMatrix<f64>, partner: &mut DMatrix<f64>) {
    for c in 0..v.ncols() {
        let col = v.column(c);
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            v.column_mut(c).neg_mut();
            partner.column_mut(c).neg_mut();
        }
    }
}

/// Median of a slice; `NaN`-free input assumed.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Two-sided normal-reference p-value `Pr(|Z| ≥ |t|)`.
pub(crate) fn two_sided_normal_p(t: f64) -> f64 {
    libm::erfc(t.abs() / std::f64::consts::SQRT_2)
}

/// Horizontal concatenation of column blocks that share a row count.
pub(crate) fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_recovers_exact_coefficients() {
        let design = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 2., 1., 3., 1., 4.]);
        let truth = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 3.0]);
        let y = &truth * design.transpose();
        let fit = RowRegression::fit(&y, &design).unwrap();
        assert!((fit.coef - truth).amax() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn duplicated_design_column_is_singular() {
        let design = DMatrix::from_row_slice(4, 2, &[1., 1., 2., 2., 3., 3., 4., 4.]);
        let y = DMatrix::from_element(3, 4, 1.0);
        assert_eq!(
            RowRegression::fit(&y, &design).unwrap_err(),
            LeappError::SingularDesign
        );
    }

    #[test]
    fn gram_singular_values_match_full_svd() {
        let m = DMatrix::from_fn(12, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 4.0 + 0.1 * j as f64);
        let (vals, _) = gram_right_singular(&m, 2);
        let mut svd = m.clone().svd(false, false).singular_values.as_slice().to_vec();
        svd.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in vals.iter().zip(&svd) {
            assert!((a - b).abs() < 1e-9 * svd[0]);
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

//! Orthogonal rotation that moves the primary variable onto the first
//! coordinate, and the split of the rotated data into the column carrying
//! the primary effect and the primary-free block.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LeappError, Result};
use crate::model::{DataMatrix, StudyDesign};

const UNIT_TOL: f64 = 1e-10;
const DEGENERATE_TOL: f64 = 1e-12;

/// An orthogonal `n × n` matrix `O` with `O g = e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    o: DMatrix<f64>,
}

impl RotationMatrix {
    /// Wraps an explicit matrix, checking orthogonality.
    pub fn from_matrix(o: DMatrix<f64>) -> Result<Self> {
        if !o.is_square() {
            return Err(LeappError::DimensionMismatch("rotation must be square".into()));
        }
        let n = o.nrows();
        if (o.tr_mul(&o) - DMatrix::<f64>::identity(n, n)).amax() > 1e-8 {
            return Err(LeappError::NumericalFailure("matrix is not orthogonal".into()));
        }
        Ok(Self { o })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.o
    }

    pub fn dim(&self) -> usize {
        self.o.nrows()
    }

    /// `(1 ⊕ Q) O`: another rotation sending `g` to `e₁`, for any orthogonal
    /// `Q` of size `n - 1`.
    pub fn with_complement(&self, q: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        if q.nrows() + 1 != n || !q.is_square() {
            return Err(LeappError::DimensionMismatch(format!(
                "complement must be {0}×{0}",
                n - 1
            )));
        }
        let mut block = DMatrix::zeros(n, n);
        block[(0, 0)] = 1.0;
        block.view_mut((1, 1), (n - 1, n - 1)).copy_from(q);
        Self::from_matrix(block * &self.o)
    }
}

/// Householder reflection `I - 2κκᵀ`, `κ = (g - e₁)/‖g - e₁‖`, for a unit
/// vector `g`. When `g` already equals `e₁` the identity is returned.
pub fn householder_for(g: &DVector<f64>) -> Result<RotationMatrix> {
    let norm = g.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(LeappError::NotUnitVector(norm));
    }
    let n = g.len();
    let mut kappa = g.clone();
    kappa[0] -= 1.0;
    let len = kappa.norm();
    let mut o = DMatrix::identity(n, n);
    if len >= DEGENERATE_TOL {
        kappa /= len;
        o -= 2.0 * &kappa * kappa.transpose();
    }
    Ok(RotationMatrix { o })
}

/// Haar-distributed random orthogonal `m × m` matrix.
pub fn random_orthogonal(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fixing the signs of R's diagonal makes the distribution uniform.
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rotated data `Y O ᵀ` split into its first column and the rest; the
/// covariates are rotated as `O X` and split by rows.
#[derive(Debug, Clone)]
pub struct RotatedData {
    /// First column of the rotated response, length `N`.
    pub y_first: DVector<f64>,
    /// Remaining `N × (n-1)` block, free of the primary effect.
    pub y_rest: DMatrix<f64>,
    /// First row of the rotated covariates, length `s`.
    pub x_first: DVector<f64>,
    /// Remaining `(n-1) × s` rows of the rotated covariates.
    pub x_rest: DMatrix<f64>,
}

impl RotatedData {
    pub fn n_genes(&self) -> usize {
        self.y_first.len()
    }

    /// Number of primary-free columns, `n - 1`.
    pub fn n_rest(&self) -> usize {
        self.y_rest.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.x_rest.ncols()
    }
}

pub fn rotate_and_split(
    y: &DataMatrix,
    d: &StudyDesign,
    o: &RotationMatrix,
) -> Result<RotatedData> {
    let n = y.n_subjects();
    if o.dim() != n || d.x.nrows() != n {
        return Err(LeappError::DimensionMismatch(format!(
            "rotation is {0}×{0}, covariates have {1} rows, data have {n} subjects",
            o.dim(),
            d.x.nrows()
        )));
    }
    let yr = y.values() * o.matrix().transpose();
    let xr = o.matrix() * &d.x;
    Ok(RotatedData {
        y_first: yr.column(0).into_owned(),
        y_rest: yr.columns(1, n - 1).into_owned(),
        x_first: xr.row(0).transpose(),
        x_rest: xr.rows(1, n - 1).into_owned(),
    })
}

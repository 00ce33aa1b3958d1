//! Synthetic data `Y = γ gᵀ + U Vᵀ + Σ E` with controlled signal-to-noise
//! and latent-to-noise ratios.
//!
//! Every random component is drawn from its own ChaCha stream keyed by the
//! scenario seed, so e.g. the effects can be held fixed while the noise is
//! redrawn.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{LeappError, Result};
use crate::model::{DataMatrix, SimTruth, StudyDesign};

/// Independent random streams used by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Gamma = 1,
    Sigma = 2,
    U = 3,
    W = 4,
    E = 5,
}

/// Random generator for one component of one scenario.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    /// Subjects; must be even.
    pub n: usize,
    /// Genes.
    #[serde(rename = "N")]
    pub n_genes: usize,
    /// Signal-to-noise ratio `π c²`.
    pub snr: f64,
    /// Latent-to-noise ratio `a² / 3`.
    pub lnr: f64,
    /// Correlation between `g` and each latent column.
    pub rho: f64,
    /// Probability that a gene is associated with `g`.
    pub pi: f64,
    pub k: usize,
    pub seed: u64,
    /// Seed for the effect vector `γ` only; defaults to `seed`. Holding it
    /// fixed across data sets gives them a shared set of nonnull genes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_seed: Option<u64>,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            n: 60,
            n_genes: 1000,
            snr: 1.0,
            lnr: 2.0,
            rho: 0.5,
            pi: 0.1,
            k: 1,
            seed: 0,
            gamma_seed: None,
        }
    }
}

impl SimScenario {
    /// Common effect size `c = sqrt(SNR / π)`.
    pub fn effect_size(&self) -> f64 {
        (self.snr / self.pi).sqrt()
    }

    /// Half-width `a = sqrt(3 LNR)` of the uniform latent loadings.
    pub fn latent_half_width(&self) -> f64 {
        (3.0 * self.lnr).sqrt()
    }

    /// Signal-to-latent ratio `SNR / LNR`.
    pub fn slr(&self) -> f64 {
        self.snr / self.lnr
    }

    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(LeappError::InvalidScenario(msg));
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return fail(format!("n = {} must be even and at least 4", self.n));
        }
        if self.n_genes < 2 {
            return fail(format!("N = {} must be at least 2", self.n_genes));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return fail(format!("pi = {} must lie in (0, 1)", self.pi));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return fail(format!("snr = {} must be nonnegative", self.snr));
        }
        if !(self.lnr >= 0.0 && self.lnr.is_finite()) {
            return fail(format!("lnr = {} must be nonnegative", self.lnr));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return fail(format!("rho = {} must lie in (-1, 1)", self.rho));
        }
        if self.k + 2 > self.n {
            return fail(format!("k = {} too large for n = {}", self.k, self.n));
        }
        Ok(())
    }
}

/// Balanced two-group primary variable `∝ (1, …, 1, -1, …, -1)` with unit norm.
pub fn balanced_primary(n: usize) -> DVector<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    DVector::from_fn(n, |j, _| if j < n / 2 { scale } else { -scale })
}

/// Draws the data, the design and the ground truth for a scenario.
pub fn generate(sc: &SimScenario) -> Result<(DataMatrix, StudyDesign, SimTruth)> {
    sc.check()?;
    let (n, n_genes, k) = (sc.n, sc.n_genes, sc.k);
    let g = balanced_primary(n);

    let c = sc.effect_size();
    let mut rng = stream_rng(sc.gamma_seed.unwrap_or(sc.seed), Stream::Gamma);
    let nonnull_mask: Vec<bool> = (0..n_genes).map(|_| rng.random::<f64>() < sc.pi).collect();
    let gamma = DVector::from_fn(n_genes, |i, _| if nonnull_mask[i] { c } else { 0.0 });

    // 1/σ² ~ Gamma(shape 5, scale 1) / 4, so E σ² = 4 / (5 - 1) = 1.
    let precision = Gamma::<f64>::new(5.0, 1.0).expect("valid gamma parameters");
    let mut rng = stream_rng(sc.seed, Stream::Sigma);
    let sigma = DVector::from_fn(n_genes, |_, _| (4.0 / precision.sample(&mut rng)).sqrt());

    let a = sc.latent_half_width();
    let mut rng = stream_rng(sc.seed, Stream::U);
    let u = if a > 0.0 {
        let dist = Uniform::new(-a, a).expect("valid uniform bounds");
        DMatrix::from_fn(n_genes, k, |_, _| dist.sample(&mut rng))
    } else {
        DMatrix::zeros(n_genes, k)
    };

    let mut rng = stream_rng(sc.seed, Stream::W);
    let spread = (1.0 - sc.rho * sc.rho).sqrt();
    let mut v = DMatrix::zeros(n, k);
    for c in 0..k {
        let w = orthogonal_unit_with(&g, &mut rng);
        v.set_column(c, &(sc.rho * &g + spread * w));
    }

    let mut rng = stream_rng(sc.seed, Stream::E);
    let noise = DMatrix::from_fn(n_genes, n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        sigma[i] * e
    });

    let y = &gamma * g.transpose() + &u * v.transpose() + noise;
    let truth = SimTruth {
        gamma,
        u,
        v,
        sigma,
        nonnull_mask,
    };
    Ok((
        DataMatrix::new(y)?,
        StudyDesign::new(g, None, Some(k)),
        truth,
    ))
}

/// Unit vector uniformly distributed on the sphere orthogonal to the unit
/// vector `g`.
pub fn sample_orthogonal_unit(g: &DVector<f64>, seed: u64) -> DVector<f64> {
    let mut rng = stream_rng(seed, Stream::W);
    orthogonal_unit_with(g, &mut rng)
}

fn orthogonal_unit_with<R: Rng>(g: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(g.len(), |_, _| StandardNormal.sample(rng));
        let w: DVector<f64> = &z - g * g.dot(&z);
        let norm = w.norm();
        if norm > 1e-8 {
            let w = w / norm;
            // One re-projection keeps the orthogonality at rounding level.
            let w = &w - g * g.dot(&w);
            return w.normalize();
        }
    }
}

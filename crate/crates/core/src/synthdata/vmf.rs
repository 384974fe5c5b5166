//! von Mises–Fisher sampling by rejection on the `w = μᵀx` marginal.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::manifolds::sphere::UNIT_TOLERANCE;
use crate::{rng_from_seed, Error, Result, Rng};

/// Mean direction `μ` (unit vector in `R^{d+1}`) and concentration `κ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmfParams {
    mu: DVector<f64>,
    kappa: f64,
}

impl VmfParams {
    pub fn new(mu: DVector<f64>, kappa: f64) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::InvalidSpec("vMF needs a direction in at least R^2".into()));
        }
        if (mu.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Geometry(format!("vMF mean direction has norm {}", mu.norm())));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidSpec(format!("vMF concentration must be >= 0, got {kappa}")));
        }
        Ok(Self { mu, kappa })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `n` i.i.d. draws, deterministic given `seed`.
pub fn sample_vmf(params: &VmfParams, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| sample_vmf_with(params, &mut rng)).collect()
}

/// One draw from `rng`'s stream.
pub fn sample_vmf_with(params: &VmfParams, rng: &mut Rng) -> DVector<f64> {
    let mu = &params.mu;
    let w = sample_cosine(params.kappa, mu.len(), rng);
    // Uniform direction orthogonal to μ.
    let v = loop {
        let g: DVector<f64> = DVector::from_fn(mu.len(), |_, _| StandardNormal.sample(rng));
        let v = &g - mu * mu.dot(&g);
        let norm = v.norm();
        if norm > 1e-12 {
            break v / norm;
        }
    };
    let x = mu * w + v * (1.0 - w * w).max(0.0).sqrt();
    x.normalize()
}

/// Draws `w ∈ [−1, 1]` with density `∝ e^{κw} (1 − w²)^{(m−3)/2}` where `m`
/// is the ambient dimension.
fn sample_cosine(kappa: f64, m: usize, rng: &mut Rng) -> f64 {
    let d = (m - 1) as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(d / 2.0, d / 2.0).expect("positive shape parameters");
    loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w.clamp(-1.0, 1.0);
        }
    }
}

/// Uniform point on the unit sphere in `R^{d+1}`.
pub fn uniform_sphere(d: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let g: DVector<f64> = DVector::from_fn(d + 1, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

//! Independent oracles shared by the integration tests: central finite
//! differences, the Kolmogorov–Smirnov statistic and a quadrature model of
//! the vMF cosine marginal. The acceptance target includes this file too.

#![allow(dead_code)]

use manifold_nets::manifolds::ManifoldPoint;
use manifold_nets::models::{model_gradients, GeoModel};
use manifold_nets::nn::{loss_and_grad, Gradients, LossKind, NetworkParams, Targets};
use manifold_nets::rng_from_seed;
use manifold_nets::spdnet::SpdNetModel;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-6;

/// `(f(h) − f(−h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central-difference gradient of `loss` with respect to every parameter
/// of `net`, in [`NetworkParams::parameters`] order.
pub fn network_fd_gradient(net: &NetworkParams, loss: impl Fn(&NetworkParams) -> f64) -> Vec<f64> {
    let count = net.parameter_count();
    let mut work = net.clone();
    (0..count)
        .map(|i| {
            central_difference(
                |h| {
                    let orig = *net.parameters().nth(i).unwrap();
                    *work.parameters_mut().nth(i).unwrap() = orig + h;
                    let v = loss(&work);
                    *work.parameters_mut().nth(i).unwrap() = orig;
                    v
                },
                FD_STEP,
            )
        })
        .collect()
}

pub fn flat(g: &Gradients) -> Vec<f64> {
    g.values().copied().collect()
}

fn model_loss(model: &GeoModel, points: &[ManifoldPoint], t: &Targets, loss: LossKind) -> f64 {
    let outs: Vec<DVector<f64>> = points.iter().map(|p| model.forward(p).unwrap()).collect();
    loss_and_grad(loss, &DMatrix::from_columns(&outs), t).unwrap().0
}

/// Worst relative error over the networks of `model`, perturbing one
/// network at a time.
pub fn model_gradient_error(model: &GeoModel, points: &[ManifoldPoint], t: &Targets, loss: LossKind) -> f64 {
    let (grads, value) = model_gradients(model, points, t, loss).unwrap();
    assert!((value - model_loss(model, points, t, loss)).abs() < 1e-12);
    grads
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let fd = network_fd_gradient(&model.networks()[k], |net| {
                let mut m = model.clone();
                m.networks_mut()[k] = net.clone();
                model_loss(&m, points, t, loss)
            });
            relative_error(&flat(g), &fd)
        })
        .fold(0.0, f64::max)
}

fn spdnet_loss(model: &SpdNetModel, points: &[DMatrix<f64>], t: &Targets, loss: LossKind) -> f64 {
    let refs: Vec<&DMatrix<f64>> = points.iter().collect();
    loss_and_grad(loss, &model.predict(&refs).unwrap(), t).unwrap().0
}

/// Worst relative error of an SPDNet over its BiMap weights, its dense
/// network and the directional derivatives of each input matrix along
/// random symmetric directions.
pub fn spdnet_gradient_error(
    model: &SpdNetModel,
    points: &[DMatrix<f64>],
    t: &Targets,
    loss: LossKind,
    seed: u64,
) -> f64 {
    let refs: Vec<&DMatrix<f64>> = points.iter().collect();
    let (grads, value, d_inputs) = model.gradients_with_inputs(&refs, t, loss, false).unwrap();
    assert!((value - spdnet_loss(model, points, t, loss)).abs() < 1e-12);
    let mut worst: f64 = 0.0;

    for (l, g) in grads.bimaps.iter().enumerate() {
        let mut fd = Vec::new();
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                fd.push(central_difference(
                    |h| {
                        let mut m = model.clone();
                        m.bimap_weight_mut_unchecked(l)[(i, j)] += h;
                        spdnet_loss(&m, points, t, loss)
                    },
                    FD_STEP,
                ));
            }
        }
        worst = worst.max(relative_error(g.as_slice(), &fd));
    }

    let fd = network_fd_gradient(&model.network, |net| {
        let mut m = model.clone();
        m.network = net.clone();
        spdnet_loss(&m, points, t, loss)
    });
    worst = worst.max(relative_error(&flat(&grads.network), &fd));

    let mut rng = rng_from_seed(seed);
    let n = points[0].nrows();
    for (s, g) in d_inputs.iter().enumerate() {
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for _ in 0..6 {
            let e = random_symmetric(n, &mut rng);
            analytic.push(g.dot(&e));
            numeric.push(central_difference(
                |h| {
                    let mut p = points.to_vec();
                    p[s] += &e * h;
                    spdnet_loss(model, &p, t, loss)
                },
                FD_STEP,
            ));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

pub fn random_symmetric(n: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    (&a + a.transpose()) * 0.5
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with `λ` uniform in `[lo, hi]`.
pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    spd_with_spectrum(&values, rng)
}

pub fn random_orthogonal(n: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    a.qr().q()
}

pub fn spd_with_spectrum(values: &[f64], rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let q = random_orthogonal(values.len(), rng);
    let m = &q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 0.01: `sqrt(ln(2/α)/2)/√n`.
pub fn ks_critical_001(n: usize) -> f64 {
    ((2.0f64 / 0.01).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// The density of `w = μᵀx` for `x ~ vMF(μ, κ)` on `S^d`,
/// `∝ exp(κ w) (1 − w²)^{(d−2)/2}` on `[−1, 1]`, tabulated by the
/// trapezoid rule.
pub struct CosineMarginal {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
}

impl CosineMarginal {
    pub fn new(d: usize, kappa: f64) -> Self {
        const CELLS: usize = 400_000;
        let expo = (d as f64 - 2.0) / 2.0;
        let density = |w: f64| {
            let s = (1.0 - w * w).max(0.0);
            // Shifted by exp(−κ) to stay finite for large κ.
            (kappa * (w - 1.0)).exp() * if expo == 0.0 { 1.0 } else { s.powf(expo) }
        };
        let grid: Vec<f64> = (0..=CELLS).map(|i| -1.0 + 2.0 * i as f64 / CELLS as f64).collect();
        let dens: Vec<f64> = grid.iter().map(|&w| density(w)).collect();
        let mut cdf = vec![0.0; grid.len()];
        let mut moment = 0.0;
        for i in 1..grid.len() {
            let h = grid[i] - grid[i - 1];
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
            moment += 0.5 * h * (grid[i] * dens[i] + grid[i - 1] * dens[i - 1]);
        }
        let total = cdf[grid.len() - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Self {
            grid,
            cdf,
            mean: moment / total,
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w <= -1.0 {
            return 0.0;
        }
        if w >= 1.0 {
            return 1.0;
        }
        let cells = (self.grid.len() - 1) as f64;
        let pos = (w + 1.0) / 2.0 * cells;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let t = pos - i as f64;
        self.cdf[i] * (1.0 - t) + self.cdf[i + 1] * t
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

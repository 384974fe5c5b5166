use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, Metric};
use super::train::{train_erm, Family, ModelConfig, TrainConfig};
use crate::synthdata::{gen_regression_sphere, RegressionTarget};
use crate::{derive_seed, Error, Result};

/// Mean risks below this make the log-log fit meaningless.
const DEGENERATE_RISK: f64 = 1e-12;

/// Regression on `S^dim` at increasing sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub f0: RegressionTarget,
    pub dim: usize,
    pub noise: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    /// Size of each noise-free test set.
    pub test_size: usize,
    pub family: Family,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            f0: RegressionTarget::Smooth,
            dim: 2,
            noise: 0.1,
            n_grid: vec![500, 2000, 8000],
            replications: 5,
            test_size: 10_000,
            family: Family::Ednn,
        }
    }
}

impl RateConfig {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        if self.n_grid.len() < 3 {
            v.push(("n_grid".into(), "needs at least 3 sample sizes".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            v.push(("n_grid".into(), "must be strictly increasing".into()));
        }
        if self.replications == 0 {
            v.push(("replications".into(), "must be positive".into()));
        }
        if self.test_size == 0 {
            v.push(("test_size".into(), "must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            v.push(("noise".into(), "must be >= 0".into()));
        }
        if self.dim + 1 < self.f0.min_ambient_len() || self.dim == 0 {
            v.push(("dim".into(), format!("{:?} is not defined on S^{}", self.f0, self.dim)));
        }
        if matches!(self.family, Family::Knn) || !self.family.supports(crate::manifolds::Manifold::Sphere { dim: self.dim }) {
            v.push(("family".into(), format!("{} cannot fit a regression on the sphere", self.family)));
        }
        v
    }
}

/// Held-out excess risk `mean (f̂(x) − f0(x))²` for one `(n, replication)`
/// cell, on a fresh noise-free test set.
pub fn rate_cell(
    config: &RateConfig,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    n: usize,
    replication: usize,
    seed: u64,
) -> Result<f64> {
    let cell = derive_seed(derive_seed(seed, n as u64), replication as u64);
    let train = gen_regression_sphere(config.f0, config.dim, config.noise, n, derive_seed(cell, 0))?;
    let test = gen_regression_sphere(config.f0, config.dim, 0.0, config.test_size, derive_seed(cell, 1))?;
    let outcome = train_erm(config.family, model_config, train_config, &train, derive_seed(cell, 2))?;
    evaluate(&outcome.model, &test, Metric::Risk)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_risk: f64,
    pub sd: f64,
    pub risks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub fingerprint: String,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log risk` against `log n`; absent when
    /// degenerate.
    pub slope: Option<f64>,
    /// Risks are (numerically) zero or the target is constant, so no slope
    /// was fitted.
    pub degenerate: bool,
    pub strictly_decreasing: bool,
}

impl RateReport {
    /// `risks[i]` holds the replications for `n_grid[i]`.
    pub fn assemble(n_grid: &[usize], risks: Vec<Vec<f64>>) -> Self {
        let rows: Vec<RateRow> = n_grid
            .iter()
            .zip(risks)
            .map(|(&n, r)| {
                let k = r.len() as f64;
                let mean = r.iter().sum::<f64>() / k;
                let sd = if r.len() > 1 {
                    (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                RateRow { n, mean_risk: mean, sd, risks: r }
            })
            .collect();
        let degenerate = rows.iter().any(|r| !(r.mean_risk > DEGENERATE_RISK));
        let slope = (!degenerate).then(|| {
            let pts: Vec<(f64, f64)> =
                rows.iter().map(|r| ((r.n as f64).ln(), r.mean_risk.ln())).collect();
            least_squares_slope(&pts)
        });
        let strictly_decreasing = rows.windows(2).all(|w| w[1].mean_risk < w[0].mean_risk);
        Self {
            fingerprint: String::new(),
            rows,
            slope,
            degenerate,
            strictly_decreasing,
        }
    }

    /// Marks the report degenerate and drops the slope.
    pub fn flag_degenerate(&mut self) {
        self.degenerate = true;
        self.slope = None;
    }

    /// `fingerprint,n,mean_risk,sd` per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fingerprint,n,mean_risk,sd\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", self.fingerprint, r.n, r.mean_risk, r.sd);
        }
        out
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs every cell sequentially and fits the rate.
pub fn rate_experiment(
    config: &RateConfig,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<RateReport> {
    if let Some((field, msg)) = config.violations().into_iter().next() {
        return Err(Error::InvalidSpec(format!("{field}: {msg}")));
    }
    let risks = config
        .n_grid
        .iter()
        .map(|&n| {
            (0..config.replications)
                .map(|r| rate_cell(config, model_config, train_config, n, r, seed))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RateReport::assemble(&config.n_grid, risks);
    if config.f0.is_constant() {
        report.flag_degenerate();
    }
    Ok(report)
}

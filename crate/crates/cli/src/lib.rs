//! Config-driven experiment runner behind the `mnets` binary.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use manifold_nets::experiments::{
    rate_cell, run_split, Family, Metric, MetricsReport, RateReport, SplitResult,
};
use manifold_nets::io::save_dataset;
use manifold_nets::manifolds::Manifold;
use manifold_nets::synthdata::{
    ellipse_template, gen_planar_shapes, gen_regression_sphere, gen_spd_dataset, random_spd_bases,
    sample_mixture, Dataset, MixtureSpec, ShapeSpec, SpdClassSpec,
};
use manifold_nets::{derive_seed, Error};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error as ThisError;

pub use config::{ExperimentConfig, ExperimentKind, Violation};

/// Stream of the experiment seed that seeds data generation.
const DATA_STREAM: u64 = u64::MAX;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Config(Vec<Violation>),

    #[error(transparent)]
    Run(#[from] Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// 2 for configuration errors, 4 for geometry and coverage errors,
    /// 3 for every other runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(e) if e.is_geometric() => 4,
            _ => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Applies overrides and fails with every violation if the result is
    /// not runnable.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<Self, CliError> {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Config(v))
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or_else(|| derive_seed(self.seed, DATA_STREAM))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("mnets-out"))
    }
}

/// Dataset for a classification experiment; `split` selects a fresh draw
/// when the config resamples per split.
pub fn build_dataset(config: &ExperimentConfig, split: usize) -> Result<Dataset, CliError> {
    if let Some(path) = &config.data.path {
        let data = manifold_nets::io::load_dataset(path, None)?;
        let expected = match (config.kind, data.manifold()) {
            (ExperimentKind::MixtureClassify, Manifold::Sphere { .. })
            | (ExperimentKind::ShapeClassify, Manifold::Preshape { .. })
            | (ExperimentKind::SpdClassify, Manifold::Spd { .. }) => None,
            (kind, m) => Some(format!("{kind} cannot use {m} data")),
        };
        if let Some(msg) = expected {
            return Err(CliError::Config(vec![Violation {
                path: "data.path".into(),
                message: msg,
            }]));
        }
        return Ok(data);
    }
    let seed = if config.data.resample_per_split {
        derive_seed(config.data_seed(), split as u64)
    } else {
        config.data_seed()
    };
    let d = &config.data;
    let data = match config.kind {
        ExperimentKind::MixtureClassify => sample_mixture(&MixtureSpec {
            dim: d.mixture.dim,
            classes: d.mixture.classes,
            centers: d.mixture.centers.clone(),
            kappa1: d.mixture.kappa1,
            kappa2: d.mixture.kappa2,
            sub_centers: d.mixture.sub_centers,
            n_per_class: d.mixture.n_per_class,
            seed,
        })?,
        ExperimentKind::ShapeClassify => {
            let k = config.shape_landmarks();
            let templates = d
                .shapes
                .templates
                .iter()
                .map(|t| t.points.clone().unwrap_or_else(|| ellipse_template(k, t.aspect, t.bend)))
                .collect();
            gen_planar_shapes(&ShapeSpec {
                templates,
                noise: d.shapes.noise,
                n_per_class: d.shapes.n_per_class,
                max_rotation: d.shapes.max_rotation,
                seed,
            })?
        }
        ExperimentKind::SpdClassify => gen_spd_dataset(&SpdClassSpec {
            size: d.spd.size,
            bases: random_spd_bases(d.spd.size, d.spd.classes, d.spd.separation, derive_seed(seed, 0)),
            spread: d.spd.spread,
            n_per_class: d.spd.n_per_class,
            seed: derive_seed(seed, 1),
        })?,
        ExperimentKind::RateCheck => {
            let r = &config.rate;
            gen_regression_sphere(r.f0, r.dim, r.noise, *r.n_grid.last().unwrap_or(&1), seed)?
        }
    };
    Ok(data)
}

/// Results of a run, before they are written anywhere.
#[derive(Debug, Clone)]
pub enum Outcome {
    Splits(MetricsReport),
    Rate(RateReport),
}

impl Outcome {
    pub fn to_csv(&self) -> String {
        match self {
            Outcome::Splits(r) => r.to_csv(),
            Outcome::Rate(r) => r.to_csv(),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(match self {
            Outcome::Splits(r) => r.to_json()?,
            Outcome::Rate(r) => serde_json::to_string_pretty(r).map_err(Error::from)?,
        })
    }

    /// One line per family (or per sample size for the rate experiment).
    pub fn summary(&self) -> Vec<String> {
        match self {
            Outcome::Splits(r) => r
                .families
                .iter()
                .map(|f| format!("{} {:.4}±{:.4} ({} splits)", f.family, f.mean, f.sd, f.per_split.len()))
                .collect(),
            Outcome::Rate(r) => {
                let mut lines: Vec<String> = r
                    .rows
                    .iter()
                    .map(|row| {
                        format!("n={} {:.6}±{:.6} ({} replications)", row.n, row.mean_risk, row.sd, row.risks.len())
                    })
                    .collect();
                lines.push(match r.slope {
                    Some(s) => format!("slope {s:.4} (strictly decreasing: {})", r.strictly_decreasing),
                    None => "slope skipped: risks are degenerate".into(),
                });
                lines
            }
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Outcome::Splits(r) => &r.warnings,
            Outcome::Rate(_) => &[],
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Run(Error::InvalidSpec(format!("worker pool: {e}"))))
}

/// Runs the repeated-split experiment on `jobs` workers.
pub fn run_splits(config: &ExperimentConfig, jobs: usize) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let families = config.parsed_families();
    let shared = if config.data.resample_per_split {
        None
    } else {
        Some(build_dataset(config, 0)?)
    };
    if let Some(data) = &shared {
        check_families(config, data.manifold())?;
    }
    let results: Vec<SplitResult> = pool(jobs)?.install(|| {
        (0..config.splits)
            .into_par_iter()
            .map(|s| {
                let fresh;
                let data = match &shared {
                    Some(d) => d,
                    None => {
                        fresh = build_dataset(config, s)?;
                        &fresh
                    }
                };
                Ok(run_split(data, &families, &config.model, &config.train, config.seed, s)?)
            })
            .collect::<Result<_, CliError>>()
    })?;
    Ok(Outcome::Splits(MetricsReport::assemble(
        Metric::Accuracy,
        &families,
        results,
        config.fingerprint(),
        start.elapsed().as_secs_f64(),
    )))
}

fn check_families(config: &ExperimentConfig, manifold: Manifold) -> Result<(), CliError> {
    let v: Vec<Violation> = config
        .families
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            let f: Family = name.parse().ok()?;
            (!f.supports(manifold)).then(|| Violation {
                path: format!("families[{i}]"),
                message: format!("{f} does not support {manifold} inputs"),
            })
        })
        .collect();
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(v))
    }
}

/// Runs every `(n, replication)` cell of the rate experiment on `jobs`
/// workers.
pub fn run_rate(config: &ExperimentConfig, jobs: usize) -> Result<Outcome, CliError> {
    let r = &config.rate;
    let cells: Vec<(usize, usize)> = r
        .n_grid
        .iter()
        .flat_map(|&n| (0..r.replications).map(move |rep| (n, rep)))
        .collect();
    let risks: Vec<f64> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(n, rep)| rate_cell(r, &config.model, &config.train, n, rep, config.seed))
            .collect::<Result<_, Error>>()
    })?;
    let per_n = risks.chunks(r.replications.max(1)).map(<[f64]>::to_vec).collect();
    let mut report = RateReport::assemble(&r.n_grid, per_n);
    if r.f0.is_constant() {
        report.flag_degenerate();
    }
    report.fingerprint = config.fingerprint();
    Ok(Outcome::Rate(report))
}

/// Runs the experiment named by the config's kind.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> Result<Outcome, CliError> {
    match config.kind {
        ExperimentKind::RateCheck => run_rate(config, jobs),
        _ => run_splits(config, jobs),
    }
}

#[derive(Serialize)]
struct RunProvenance<'a> {
    tool: &'static str,
    version: &'static str,
    fingerprint: String,
    kind: ExperimentKind,
    seed: u64,
    data_seed: u64,
    config: &'a ExperimentConfig,
    datasets: Vec<serde_json::Value>,
    files: Vec<&'static str>,
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(vec![Violation {
            path: "out".into(),
            message: format!("{} is not writable: {e}", dir.display()),
        }])
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Writes `metrics.json`, `metrics.csv`, `provenance.json` and, when
/// requested, `dataset.csv` into the output directory.
pub fn write_outputs(config: &ExperimentConfig, outcome: &Outcome) -> Result<PathBuf, CliError> {
    let dir = config.out_dir();
    prepare_dir(&dir)?;
    write(&dir, "metrics.json", &outcome.to_json()?)?;
    write(&dir, "metrics.csv", &outcome.to_csv())?;
    let mut files = vec!["metrics.json", "metrics.csv", "provenance.json"];
    let mut datasets = Vec::new();
    if config.kind != ExperimentKind::RateCheck {
        let count = if config.data.resample_per_split { config.splits } else { 1 };
        for s in 0..count {
            let data = build_dataset(config, s)?;
            if s == 0 && config.save_dataset {
                save_dataset(&data, &dir.join("dataset.csv"), None)?;
                files.push("dataset.csv");
            }
            datasets.push(serde_json::to_value(&data.provenance).map_err(Error::from)?);
        }
    }
    let prov = RunProvenance {
        tool: "mnets",
        version: env!("CARGO_PKG_VERSION"),
        fingerprint: config.fingerprint(),
        kind: config.kind,
        seed: config.seed,
        data_seed: config.data_seed(),
        config,
        datasets,
        files,
    };
    write(&dir, "provenance.json", &serde_json::to_string_pretty(&prov).map_err(Error::from)?)?;
    Ok(dir)
}

/// Writes only the dataset (`dataset.csv` plus `provenance.json`).
pub fn generate(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = config.out_dir();
    prepare_dir(&dir)?;
    let data = build_dataset(config, 0)?;
    save_dataset(&data, &dir.join("dataset.csv"), None)?;
    let prov = RunProvenance {
        tool: "mnets",
        version: env!("CARGO_PKG_VERSION"),
        fingerprint: config.fingerprint(),
        kind: config.kind,
        seed: config.seed,
        data_seed: config.data_seed(),
        config,
        datasets: vec![serde_json::to_value(&data.provenance).map_err(Error::from)?],
        files: vec!["dataset.csv", "provenance.json"],
    };
    write(&dir, "provenance.json", &serde_json::to_string_pretty(&prov).map_err(Error::from)?)?;
    Ok(dir)
}

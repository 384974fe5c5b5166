use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, Metric};
use super::knn::{knn_baseline, tune_knn};
use super::train::{train_erm, Family, ModelConfig, TrainConfig};
use crate::nn::Targets;
use crate::synthdata::Dataset;
use crate::{derive_seed, rng_from_seed, Result};

/// Classes with fewer members than this disable stratification.
const MIN_STRATUM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// False when some class was too small and the split fell back to a
    /// plain random split.
    pub stratified: bool,
}

/// Random split with `test_fraction` of each class (rounded) in `test`.
/// Regression targets are split without strata. Both index lists are
/// sorted.
pub fn stratified_split(targets: &Targets, test_fraction: f64, seed: u64) -> SplitIndices {
    let mut rng = rng_from_seed(seed);
    let n = targets.len();
    let strata: Option<Vec<Vec<usize>>> = match targets {
        Targets::Labels { labels, classes } => {
            let mut by_class = vec![Vec::new(); *classes];
            for (i, &l) in labels.iter().enumerate() {
                by_class[l].push(i);
            }
            by_class.retain(|c| !c.is_empty());
            if by_class.iter().all(|c| c.len() >= MIN_STRATUM) {
                Some(by_class)
            } else {
                None
            }
        }
        Targets::Values(_) => None,
    };
    let stratified = strata.is_some() || targets.labels().is_none();
    let groups = strata.unwrap_or_else(|| vec![(0..n).collect()]);
    let mut train = Vec::with_capacity(n);
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let k = ((g.len() as f64) * test_fraction).round() as usize;
        test.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    SplitIndices {
        train,
        test,
        stratified,
    }
}

/// Scores of every family on one split, in family order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub index: usize,
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Test fraction of each repeated split.
pub const TEST_FRACTION: f64 = 0.25;

/// Trains and evaluates every family on split `index`. The split and every
/// model draw from seeds derived from `(seed, index, family)`.
pub fn run_split(
    data: &Dataset,
    families: &[Family],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    seed: u64,
    index: usize,
) -> Result<SplitResult> {
    let split_seed = derive_seed(seed, index as u64);
    let split = stratified_split(data.targets(), TEST_FRACTION, derive_seed(split_seed, 0));
    let mut warnings = Vec::new();
    if !split.stratified {
        warnings.push(format!(
            "split {index}: a class has fewer than {MIN_STRATUM} samples; split is not stratified"
        ));
    }
    let train = data.subset(&split.train);
    let test = data.subset(&split.test);
    let metric = Metric::for_targets(data.targets());
    let mut scores = Vec::with_capacity(families.len());
    for &family in families {
        let family_seed = derive_seed(split_seed, 100 + family.code());
        let score = match family {
            Family::Knn => {
                let inner = stratified_split(
                    train.targets(),
                    train_config.validation_fraction.max(f64::EPSILON),
                    derive_seed(family_seed, 3),
                );
                let k = if inner.test.is_empty() || inner.train.is_empty() {
                    model_config.knn_k.first().copied().unwrap_or(1)
                } else {
                    tune_knn(
                        &train.subset(&inner.train),
                        &train.subset(&inner.test),
                        &model_config.knn_k,
                        model_config.knn_metric,
                    )?
                    .0
                };
                knn_baseline(&train, &test, k.min(train.len()), model_config.knn_metric)?
            }
            _ => {
                let outcome = train_erm(family, model_config, train_config, &train, family_seed)?;
                evaluate(&outcome.model, &test, metric)?
            }
        };
        scores.push(score);
    }
    Ok(SplitResult {
        index,
        scores,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: Family,
    pub per_split: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over splits (0 for one split).
    pub sd: f64,
    /// `sd / √splits`.
    pub se: f64,
}

impl FamilyResult {
    pub fn from_scores(family: Family, per_split: Vec<f64>) -> Self {
        let n = per_split.len() as f64;
        let mean = per_split.iter().sum::<f64>() / n;
        let sd = if per_split.len() > 1 {
            (per_split.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            family,
            per_split,
            mean,
            sd,
            se: sd / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metric: Metric,
    pub splits: usize,
    pub fingerprint: String,
    pub families: Vec<FamilyResult>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    /// Collects split results (in any order) into a report ordered by split.
    pub fn assemble(
        metric: Metric,
        families: &[Family],
        mut results: Vec<SplitResult>,
        fingerprint: String,
        wall_clock_seconds: f64,
    ) -> Self {
        results.sort_by_key(|r| r.index);
        let families = families
            .iter()
            .enumerate()
            .map(|(f, &family)| {
                FamilyResult::from_scores(family, results.iter().map(|r| r.scores[f]).collect())
            })
            .collect();
        Self {
            metric,
            splits: results.len(),
            fingerprint,
            families,
            warnings: results.into_iter().flat_map(|r| r.warnings).collect(),
            wall_clock_seconds,
        }
    }

    /// One row per (family, split). Contains no timing, so identical runs
    /// give identical bytes.
    pub fn to_csv(&self) -> String {
        let metric = match self.metric {
            Metric::Accuracy => "accuracy",
            Metric::Risk => "risk",
        };
        let mut out = String::from("fingerprint,family,split,metric,value\n");
        for f in &self.families {
            for (s, v) in f.per_split.iter().enumerate() {
                let _ = writeln!(out, "{},{},{s},{metric},{v}", self.fingerprint, f.family);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `splits` independent 75/25 splits, run sequentially.
pub fn repeated_splits(
    data: &Dataset,
    families: &[Family],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    splits: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let start = Instant::now();
    let results = (0..splits)
        .map(|s| run_split(data, families, model_config, train_config, seed, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::assemble(
        Metric::for_targets(data.targets()),
        families,
        results,
        String::new(),
        start.elapsed().as_secs_f64(),
    ))
}

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::splits::stratified_split;
use crate::manifolds::{Atlas, Chart, Manifold, ManifoldPoint, DEFAULT_TWO_POLE_RADIUS};
use crate::models::{unflatten_point, EdnnModel, Embedding, Features, GeoModel, IdnnModel, TdnnModel};
use crate::nn::{adam_step, loss_and_grad, AdamConfig, AdamState, LossKind, Targets};
use crate::spdnet::{SpdNetModel, TerminalMap, DEFAULT_REEIG_EPSILON};
use crate::synthdata::Dataset;
use crate::{derive_seed, rng_from_seed, Error, Result};

/// Model families that can appear in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Dense network on raw ambient coordinates.
    Dnn,
    /// Dense network on the equivariant embedding.
    Ednn,
    /// Dense network on normal coordinates at the training Fréchet mean.
    Tdnn,
    /// Partition-of-unity blend of per-chart networks.
    Idnn,
    /// k-nearest neighbours under the geodesic distance.
    Knn,
    /// SPDNet stack with a LogEig terminal.
    Spdnet,
    /// SPDNet stack with a log-Euclidean tangent terminal.
    SpdnetTdnnLog,
    /// SPDNet stack with an affine-metric tangent terminal.
    SpdnetTdnnAffine,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Dnn,
        Family::Ednn,
        Family::Tdnn,
        Family::Idnn,
        Family::Knn,
        Family::Spdnet,
        Family::SpdnetTdnnLog,
        Family::SpdnetTdnnAffine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Dnn => "dnn",
            Family::Ednn => "ednn",
            Family::Tdnn => "tdnn",
            Family::Idnn => "idnn",
            Family::Knn => "knn",
            Family::Spdnet => "spdnet",
            Family::SpdnetTdnnLog => "spdnet-tdnn-log",
            Family::SpdnetTdnnAffine => "spdnet-tdnn-affine",
        }
    }

    /// Stable stream index used to derive per-family seeds.
    pub fn code(&self) -> u64 {
        Family::ALL.iter().position(|f| f == self).unwrap() as u64
    }

    pub fn supports(&self, manifold: Manifold) -> bool {
        match self {
            Family::Spdnet | Family::SpdnetTdnnLog | Family::SpdnetTdnnAffine => {
                matches!(manifold, Manifold::Spd { .. })
            }
            _ => true,
        }
    }

    fn terminal(&self) -> Option<TerminalMap> {
        match self {
            Family::Spdnet => Some(TerminalMap::LogEig),
            Family::SpdnetTdnnLog => Some(TerminalMap::LogEuclidean),
            Family::SpdnetTdnnAffine => Some(TerminalMap::Affine),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown model family {s:?}")))
    }
}

/// Charts for iDNN. Without base points a two-pole atlas is used, which
/// exists only for sphere and preshape inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtlasConfig {
    pub radius: f64,
    pub sharpness: f64,
    /// Flat ambient coordinates of each base point (SPD row-major).
    pub base_points: Option<Vec<Vec<f64>>>,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_TWO_POLE_RADIUS,
            sharpness: 1.0,
            base_points: None,
        }
    }
}

impl AtlasConfig {
    pub fn build(&self, manifold: Manifold) -> Result<Atlas> {
        let bases: Vec<ManifoldPoint> = match &self.base_points {
            Some(points) => points
                .iter()
                .map(|p| unflatten_point(manifold, p))
                .collect::<Result<_>>()?,
            None => Atlas::two_pole(manifold, self.radius)?
                .charts()
                .iter()
                .map(|c| c.base().clone())
                .collect(),
        };
        let charts = bases
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let frame = Chart::new(i, b.clone(), self.radius)?.frame().clone();
                Chart::with_frame(i, b, frame, self.radius, self.sharpness)
            })
            .collect::<Result<Vec<_>>>()?;
        Atlas::new(charts)
    }
}

/// Architecture shared by the network families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer widths of every dense network.
    pub hidden: Vec<usize>,
    pub atlas: AtlasConfig,
    /// Matrix sizes through the BiMap stack, starting at the input size.
    /// `None` halves the size three times.
    pub spd_sizes: Option<Vec<usize>>,
    pub reeig_epsilon: f64,
    pub stiefel_learning_rate: f64,
    /// Candidate neighbour counts; the best on validation data is used.
    pub knn_k: Vec<usize>,
    pub knn_metric: super::KnnMetric,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![100; 5],
            atlas: AtlasConfig::default(),
            spd_sizes: None,
            reeig_epsilon: DEFAULT_REEIG_EPSILON,
            stiefel_learning_rate: 1e-2,
            knn_k: vec![1, 3, 5, 7, 9, 11, 15, 21, 31],
            knn_metric: super::KnnMetric::Geodesic,
        }
    }
}

impl ModelConfig {
    pub fn spd_sizes_for(&self, size: usize) -> Vec<usize> {
        self.spd_sizes.clone().unwrap_or_else(|| {
            let mut s = vec![size];
            for _ in 0..3 {
                let last = *s.last().unwrap();
                s.push(last.div_ceil(2).max(1));
            }
            s
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Pick the learning rate from `learning_rate_grid` by validation loss.
    pub tune_learning_rate: bool,
    pub learning_rate_grid: Vec<f64>,
    /// Share of the training data held out for validation.
    pub validation_fraction: f64,
    /// Return the parameters of the epoch with the lowest validation loss.
    pub early_stopping: bool,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
    /// Defaults to cross-entropy for labels and squared error for values.
    pub loss: Option<LossKind>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-3,
            tune_learning_rate: false,
            learning_rate_grid: vec![1e-2, 1e-3, 1e-4],
            validation_fraction: 0.25,
            early_stopping: true,
            patience: None,
            loss: None,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, as `(field, message)`.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        if self.batch_size == 0 {
            v.push(("batch_size".into(), "must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            v.push(("learning_rate".into(), "must be a positive number".into()));
        }
        if self.tune_learning_rate && self.learning_rate_grid.is_empty() {
            v.push(("learning_rate_grid".into(), "must not be empty when tuning".into()));
        }
        for (i, lr) in self.learning_rate_grid.iter().enumerate() {
            if !(*lr > 0.0 && lr.is_finite()) {
                v.push((format!("learning_rate_grid[{i}]"), "must be a positive number".into()));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            v.push(("validation_fraction".into(), "must lie in [0, 1)".into()));
        }
        if self.patience == Some(0) {
            v.push(("patience".into(), "must be positive".into()));
        }
        v
    }
}

/// A fitted network model of any family.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Geo(GeoModel),
    Spd(SpdNetModel),
}

impl TrainedModel {
    /// Outputs, one column per point.
    pub fn predict(&self, points: &[ManifoldPoint]) -> Result<DMatrix<f64>> {
        match self {
            TrainedModel::Geo(m) => {
                let features = m.featurize(points)?;
                let idx: Vec<usize> = (0..points.len()).collect();
                m.predict_features(&features, &idx)
            }
            TrainedModel::Spd(m) => {
                let mats = spd_matrices(points)?;
                m.predict(&mats)
            }
        }
    }
}

fn spd_matrices(points: &[ManifoldPoint]) -> Result<Vec<&DMatrix<f64>>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.as_matrix()
                .ok_or_else(|| Error::InvalidSpec("SPDNet needs SPD inputs".into()).at_sample(i))
        })
        .collect()
}

/// Per-epoch losses of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub learning_rate: f64,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epoch whose parameters were returned, when chosen by validation.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: History,
}

/// Fresh, untrained model of `family` for data like `fit`.
pub fn build_model(
    family: Family,
    config: &ModelConfig,
    fit: &Dataset,
    seed: u64,
) -> Result<TrainedModel> {
    let manifold = fit.manifold();
    if !family.supports(manifold) {
        return Err(Error::InvalidSpec(format!("{family} is not available on {manifold}")));
    }
    let outputs = fit.targets().output_width();
    let hidden = &config.hidden;
    Ok(match family {
        Family::Dnn => TrainedModel::Geo(GeoModel::Ednn(EdnnModel::init(
            manifold,
            Embedding::Inclusion,
            hidden,
            outputs,
            seed,
        )?)),
        Family::Ednn => TrainedModel::Geo(GeoModel::Ednn(EdnnModel::init(
            manifold,
            Embedding::natural_for(manifold),
            hidden,
            outputs,
            seed,
        )?)),
        Family::Tdnn => TrainedModel::Geo(GeoModel::Tdnn(TdnnModel::init_at_mean(
            fit.inputs(),
            hidden,
            outputs,
            seed,
        )?)),
        Family::Idnn => TrainedModel::Geo(GeoModel::Idnn(IdnnModel::init(
            config.atlas.build(manifold)?,
            hidden,
            outputs,
            seed,
        )?)),
        Family::Knn => {
            return Err(Error::InvalidSpec("kNN has no trainable model".into()));
        }
        Family::Spdnet | Family::SpdnetTdnnLog | Family::SpdnetTdnnAffine => {
            let Manifold::Spd { size } = manifold else { unreachable!() };
            TrainedModel::Spd(SpdNetModel::init(
                &config.spd_sizes_for(size),
                config.reeig_epsilon,
                family.terminal().unwrap(),
                hidden,
                outputs,
                seed,
            )?)
        }
    })
}

trait Learner {
    /// One optimizer step on the batch; returns the batch loss. Parameters
    /// are left unchanged when the loss is not finite.
    fn step(&mut self, batch: &[usize], loss: LossKind) -> Result<f64>;
    fn validation_loss(&mut self, loss: LossKind) -> Result<Option<f64>>;
    fn snapshot(&self) -> TrainedModel;
    fn finish(self: Box<Self>) -> Result<TrainedModel>;
}

struct GeoLearner {
    model: GeoModel,
    adams: Vec<AdamState>,
    features: Features,
    targets: Targets,
    val: Option<(Features, Targets)>,
}

impl Learner for GeoLearner {
    fn step(&mut self, batch: &[usize], loss: LossKind) -> Result<f64> {
        let t = self.targets.select(batch);
        let (grads, value) = self.model.gradients_features(&self.features, batch, &t, loss)?;
        if !value.is_finite() {
            return Ok(value);
        }
        for ((net, g), adam) in self.model.networks_mut().iter_mut().zip(&grads).zip(&mut self.adams) {
            adam_step(net, g, adam)?;
        }
        Ok(value)
    }

    fn validation_loss(&mut self, loss: LossKind) -> Result<Option<f64>> {
        let Some((features, targets)) = &self.val else {
            return Ok(None);
        };
        let idx: Vec<usize> = (0..targets.len()).collect();
        let out = self.model.predict_features(features, &idx)?;
        Ok(Some(loss_and_grad(loss, &out, targets)?.0))
    }

    fn snapshot(&self) -> TrainedModel {
        TrainedModel::Geo(self.model.clone())
    }

    fn finish(self: Box<Self>) -> Result<TrainedModel> {
        Ok(TrainedModel::Geo(self.model))
    }
}

struct SpdLearner {
    model: SpdNetModel,
    adam: AdamState,
    stiefel_lr: f64,
    points: Vec<DMatrix<f64>>,
    targets: Targets,
    val: Option<(Vec<DMatrix<f64>>, Targets)>,
}

impl Learner for SpdLearner {
    fn step(&mut self, batch: &[usize], loss: LossKind) -> Result<f64> {
        let pts: Vec<&DMatrix<f64>> = batch.iter().map(|&i| &self.points[i]).collect();
        let t = self.targets.select(batch);
        let (grads, value) = self.model.batch_gradients(&pts, &t, loss, true)?;
        if !value.is_finite() {
            return Ok(value);
        }
        self.model.apply_gradients(&grads, &mut self.adam, self.stiefel_lr)?;
        Ok(value)
    }

    fn validation_loss(&mut self, loss: LossKind) -> Result<Option<f64>> {
        let Some((points, targets)) = &self.val else {
            return Ok(None);
        };
        self.model.freeze_base(&self.points)?;
        let refs: Vec<&DMatrix<f64>> = points.iter().collect();
        let out = self.model.predict(&refs)?;
        Ok(Some(loss_and_grad(loss, &out, targets)?.0))
    }

    fn snapshot(&self) -> TrainedModel {
        TrainedModel::Spd(self.model.clone())
    }

    fn finish(mut self: Box<Self>) -> Result<TrainedModel> {
        self.model.freeze_base(&self.points)?;
        Ok(TrainedModel::Spd(self.model))
    }
}

fn learner(
    model: TrainedModel,
    config: &ModelConfig,
    lr: f64,
    fit: &Dataset,
    val: Option<&Dataset>,
) -> Result<Box<dyn Learner>> {
    let adam = AdamConfig::with_learning_rate(lr);
    Ok(match model {
        TrainedModel::Geo(model) => {
            let features = model.featurize(fit.inputs())?;
            let val = match val {
                Some(v) => Some((model.featurize(v.inputs())?, v.targets().clone())),
                None => None,
            };
            let adams = model.networks().iter().map(|n| AdamState::new(n, adam)).collect();
            Box::new(GeoLearner {
                model,
                adams,
                features,
                targets: fit.targets().clone(),
                val,
            })
        }
        TrainedModel::Spd(model) => {
            let owned = |d: &Dataset| -> Result<Vec<DMatrix<f64>>> {
                Ok(spd_matrices(d.inputs())?.into_iter().cloned().collect())
            };
            let val = match val {
                Some(v) => Some((owned(v)?, v.targets().clone())),
                None => None,
            };
            Box::new(SpdLearner {
                adam: AdamState::new(&model.network, adam),
                model,
                stiefel_lr: config.stiefel_learning_rate,
                points: owned(fit)?,
                targets: fit.targets().clone(),
                val,
            })
        }
    })
}

fn train_with_lr(
    family: Family,
    model_config: &ModelConfig,
    config: &TrainConfig,
    fit: &Dataset,
    val: Option<&Dataset>,
    lr: f64,
    seed: u64,
) -> Result<TrainOutcome> {
    let loss = config.loss.unwrap_or_else(|| fit.targets().default_loss());
    let model = build_model(family, model_config, fit, derive_seed(seed, 1))?;
    let mut learner = learner(model, model_config, lr, fit, val)?;
    let mut history = History {
        learning_rate: lr,
        ..History::default()
    };
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut best_loss = f64::INFINITY;
    let mut best_model: Option<TrainedModel> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let l = learner.step(batch, loss)?;
            if !l.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            total += l * batch.len() as f64;
        }
        history.train_loss.push(total / fit.len() as f64);
        if let Some(v) = learner.validation_loss(loss)? {
            if !v.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            history.validation_loss.push(v);
            if v < best_loss {
                best_loss = v;
                since_best = 0;
                if config.early_stopping {
                    best_model = Some(learner.snapshot());
                    history.best_epoch = Some(epoch);
                }
            } else {
                since_best += 1;
                if config.patience.is_some_and(|p| since_best >= p) {
                    break;
                }
            }
        }
    }
    let model = match best_model {
        Some(m) => m,
        None => learner.finish()?,
    };
    Ok(TrainOutcome { model, history })
}

/// Empirical risk minimization with minibatch Adam.
///
/// A `validation_fraction` share of `data` is held out (stratified by
/// label when possible) for early stopping and learning-rate selection.
pub fn train_erm(
    family: Family,
    model_config: &ModelConfig,
    config: &TrainConfig,
    data: &Dataset,
    seed: u64,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidSpec("cannot train on an empty dataset".into()));
    }
    if let Some((field, msg)) = config.violations().into_iter().next() {
        return Err(Error::InvalidSpec(format!("{field}: {msg}")));
    }
    let (fit, val) = if config.validation_fraction > 0.0 && data.len() >= 2 {
        let split = stratified_split(data.targets(), config.validation_fraction, derive_seed(seed, 3));
        if split.train.is_empty() || split.test.is_empty() {
            (data.clone(), None)
        } else {
            (data.subset(&split.train), Some(data.subset(&split.test)))
        }
    } else {
        (data.clone(), None)
    };
    if !(config.tune_learning_rate && val.is_some()) {
        return train_with_lr(family, model_config, config, &fit, val.as_ref(), config.learning_rate, seed);
    }
    let mut chosen: Option<(f64, TrainOutcome)> = None;
    for &lr in &config.learning_rate_grid {
        let outcome = train_with_lr(family, model_config, config, &fit, val.as_ref(), lr, seed)?;
        let score = outcome
            .history
            .validation_loss
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if chosen.as_ref().is_none_or(|(s, _)| score < *s) {
            chosen = Some((score, outcome));
        }
    }
    Ok(chosen.expect("nonempty grid").1)
}

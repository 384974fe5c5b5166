//! eDNN, tDNN and iDNN: geometry maps composed with dense networks.
//!
//! The geometry maps (embedding, log map, partition of unity) are fixed
//! feature transforms, so training only ever touches network parameters.
//! [`GeoModel::featurize`] evaluates them once per dataset.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::manifolds::{
    self, frechet_mean, normal_coords, partition_weights, spd_embed, vw_embed, Atlas, Chart,
    Manifold, ManifoldPoint,
};
use crate::nn::{
    init_network, loss_and_grad, Gradients, LossKind, NetworkCheckpoint, NetworkParams, Targets,
};
use crate::{Error, Result};

/// Charts whose weight is below this are skipped for a sample.
pub const CHART_WEIGHT_THRESHOLD: f64 = 1e-12;

/// Embedding `J` used by an extrinsic network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// Ambient coordinates as they are (for SPD: `vec_sym(P)` without a log).
    Inclusion,
    /// `u ↦ u u*` for preshapes.
    VeroneseWhitney,
    /// `P ↦ vec_sym(log P)` for SPD matrices.
    MatrixLog,
}

impl Embedding {
    pub fn embed(&self, x: &ManifoldPoint) -> Result<DVector<f64>> {
        match self {
            Embedding::Inclusion => Ok(x.ambient_coords()),
            Embedding::VeroneseWhitney => vw_embed(x),
            Embedding::MatrixLog => spd_embed(x),
        }
    }

    /// Output length on `manifold`, or an error if the pair is unsupported.
    pub fn output_len(&self, manifold: Manifold) -> Result<usize> {
        match (self, manifold) {
            (Embedding::Inclusion, m) => Ok(m.ambient_len()),
            (Embedding::VeroneseWhitney, Manifold::Preshape { landmarks }) => {
                Ok(landmarks * landmarks)
            }
            (Embedding::MatrixLog, Manifold::Spd { size }) => {
                Ok(manifolds::linalg::sym_vec_len(size))
            }
            (e, m) => Err(Error::InvalidSpec(format!("embedding {e:?} is not defined on {m}"))),
        }
    }

    /// The equivariant embedding for each manifold.
    pub fn natural_for(manifold: Manifold) -> Self {
        match manifold {
            Manifold::Sphere { .. } => Embedding::Inclusion,
            Manifold::Preshape { .. } => Embedding::VeroneseWhitney,
            Manifold::Spd { .. } => Embedding::MatrixLog,
        }
    }
}

/// `f = g ∘ J`.
#[derive(Debug, Clone)]
pub struct EdnnModel {
    manifold: Manifold,
    embedding: Embedding,
    pub network: NetworkParams,
}

/// Network on normal coordinates at one base point.
#[derive(Debug, Clone)]
pub struct TdnnModel {
    chart: Chart,
    pub network: NetworkParams,
}

/// `f(x) = Σ_k τ_k(x) f_k(log_{x_k} x)` with independent `f_k`.
#[derive(Debug, Clone)]
pub struct IdnnModel {
    atlas: Atlas,
    pub networks: Vec<NetworkParams>,
}

fn check_input_width(network: &NetworkParams, want: usize, what: &str) -> Result<()> {
    if network.input_width() != want {
        return Err(Error::Shape(format!(
            "{what} produces {want} features but the network takes {}",
            network.input_width()
        )));
    }
    Ok(())
}

fn check_manifold(expected: Manifold, x: &ManifoldPoint) -> Result<()> {
    if x.manifold() != expected {
        return Err(Error::InvalidSpec(format!(
            "model is defined on {expected} but input is on {}",
            x.manifold()
        )));
    }
    Ok(())
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl EdnnModel {
    pub fn new(manifold: Manifold, embedding: Embedding, network: NetworkParams) -> Result<Self> {
        check_input_width(&network, embedding.output_len(manifold)?, "embedding")?;
        Ok(Self {
            manifold,
            embedding,
            network,
        })
    }

    pub fn init(
        manifold: Manifold,
        embedding: Embedding,
        hidden: &[usize],
        outputs: usize,
        seed: u64,
    ) -> Result<Self> {
        let input = embedding.output_len(manifold)?;
        Self::new(manifold, embedding, init_network(&widths(input, hidden, outputs), seed)?)
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn embedding(&self) -> Embedding {
        self.embedding
    }

    pub fn features(&self, x: &ManifoldPoint) -> Result<DVector<f64>> {
        check_manifold(self.manifold, x)?;
        self.embedding.embed(x)
    }
}

impl TdnnModel {
    pub fn new(base: ManifoldPoint, network: NetworkParams) -> Result<Self> {
        let chart = Chart::new(0, base, f64::MAX)?;
        Self::with_chart(chart, network)
    }

    pub fn with_chart(chart: Chart, network: NetworkParams) -> Result<Self> {
        check_input_width(&network, chart.dim(), "normal coordinates")?;
        Ok(Self { chart, network })
    }

    /// Base point at the Fréchet mean of `points`.
    pub fn init_at_mean(
        points: &[ManifoldPoint],
        hidden: &[usize],
        outputs: usize,
        seed: u64,
    ) -> Result<Self> {
        // A slowly converging mean is still a usable base point.
        let base = match frechet_mean(points) {
            Err(Error::Convergence { last, .. }) => *last,
            other => other?,
        };
        let chart = Chart::new(0, base, f64::MAX)?;
        let network = init_network(&widths(chart.dim(), hidden, outputs), seed)?;
        Self::with_chart(chart, network)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base(&self) -> &ManifoldPoint {
        self.chart.base()
    }

    pub fn features(&self, x: &ManifoldPoint) -> Result<DVector<f64>> {
        check_manifold(self.chart.base().manifold(), x)?;
        normal_coords(&self.chart, x)
    }
}

impl IdnnModel {
    pub fn new(atlas: Atlas, networks: Vec<NetworkParams>) -> Result<Self> {
        if networks.len() != atlas.len() {
            return Err(Error::InvalidSpec(format!(
                "{} charts but {} networks",
                atlas.len(),
                networks.len()
            )));
        }
        let out = networks[0].output_width();
        for (k, (net, chart)) in networks.iter().zip(atlas.charts()).enumerate() {
            check_input_width(net, chart.dim(), &format!("chart {k}"))?;
            if net.output_width() != out {
                return Err(Error::Shape(format!(
                    "network {k} has {} outputs, network 0 has {out}",
                    net.output_width()
                )));
            }
        }
        Ok(Self { atlas, networks })
    }

    /// One freshly initialized network per chart (seeds `seed + k`).
    pub fn init(atlas: Atlas, hidden: &[usize], outputs: usize, seed: u64) -> Result<Self> {
        let networks = atlas
            .charts()
            .iter()
            .enumerate()
            .map(|(k, c)| init_network(&widths(c.dim(), hidden, outputs), seed.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atlas, networks)
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }
}

pub fn ednn_forward(model: &EdnnModel, x: &ManifoldPoint) -> Result<DVector<f64>> {
    crate::nn::forward(&model.network, &model.features(x)?)
}

pub fn tdnn_forward(model: &TdnnModel, x: &ManifoldPoint) -> Result<DVector<f64>> {
    crate::nn::forward(&model.network, &model.features(x)?)
}

pub fn idnn_forward(model: &IdnnModel, x: &ManifoldPoint) -> Result<DVector<f64>> {
    check_manifold(model.atlas.manifold(), x)?;
    let tau = partition_weights(&model.atlas, x)?;
    let mut out = DVector::zeros(model.networks[0].output_width());
    for ((chart, net), &t) in model.atlas.charts().iter().zip(&model.networks).zip(&tau) {
        if t < CHART_WEIGHT_THRESHOLD {
            continue;
        }
        let y = crate::nn::forward(net, &normal_coords(chart, x)?)?;
        out.axpy(t, &y, 1.0);
    }
    Ok(out)
}

/// Precomputed geometric features of a set of points.
#[derive(Debug, Clone)]
pub enum Features {
    /// One column per sample (eDNN, tDNN).
    Single(DMatrix<f64>),
    /// Per-chart coordinates (zero columns where the chart is inactive) and
    /// the `K × n` matrix of partition weights.
    Charted {
        coords: Vec<DMatrix<f64>>,
        weights: DMatrix<f64>,
    },
}

impl Features {
    pub fn len(&self) -> usize {
        match self {
            Features::Single(m) => m.ncols(),
            Features::Charted { weights, .. } => weights.ncols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gather_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}

fn stack_columns(cols: Vec<DVector<f64>>, rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Any of the three manifold network families.
#[derive(Debug, Clone)]
pub enum GeoModel {
    Ednn(EdnnModel),
    Tdnn(TdnnModel),
    Idnn(IdnnModel),
}

impl GeoModel {
    pub fn manifold(&self) -> Manifold {
        match self {
            GeoModel::Ednn(m) => m.manifold,
            GeoModel::Tdnn(m) => m.chart.base().manifold(),
            GeoModel::Idnn(m) => m.atlas.manifold(),
        }
    }

    pub fn networks(&self) -> &[NetworkParams] {
        match self {
            GeoModel::Ednn(m) => std::slice::from_ref(&m.network),
            GeoModel::Tdnn(m) => std::slice::from_ref(&m.network),
            GeoModel::Idnn(m) => &m.networks,
        }
    }

    pub fn networks_mut(&mut self) -> &mut [NetworkParams] {
        match self {
            GeoModel::Ednn(m) => std::slice::from_mut(&mut m.network),
            GeoModel::Tdnn(m) => std::slice::from_mut(&mut m.network),
            GeoModel::Idnn(m) => &mut m.networks,
        }
    }

    pub fn output_width(&self) -> usize {
        self.networks()[0].output_width()
    }

    pub fn forward(&self, x: &ManifoldPoint) -> Result<DVector<f64>> {
        match self {
            GeoModel::Ednn(m) => ednn_forward(m, x),
            GeoModel::Tdnn(m) => tdnn_forward(m, x),
            GeoModel::Idnn(m) => idnn_forward(m, x),
        }
    }

    /// Evaluates the geometry maps for every point. Errors name the sample.
    pub fn featurize(&self, points: &[ManifoldPoint]) -> Result<Features> {
        match self {
            GeoModel::Ednn(m) => {
                let rows = m.embedding.output_len(m.manifold)?;
                let cols = points
                    .iter()
                    .enumerate()
                    .map(|(i, x)| m.features(x).map_err(|e| e.at_sample(i)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Features::Single(stack_columns(cols, rows)))
            }
            GeoModel::Tdnn(m) => {
                let cols = points
                    .iter()
                    .enumerate()
                    .map(|(i, x)| m.features(x).map_err(|e| e.at_sample(i)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Features::Single(stack_columns(cols, m.chart.dim())))
            }
            GeoModel::Idnn(m) => {
                let k = m.atlas.len();
                let n = points.len();
                let mut weights = DMatrix::zeros(k, n);
                let mut coords: Vec<DMatrix<f64>> = m
                    .atlas
                    .charts()
                    .iter()
                    .map(|c| DMatrix::zeros(c.dim(), n))
                    .collect();
                for (i, x) in points.iter().enumerate() {
                    let wrap = |e: Error| e.at_sample(i);
                    check_manifold(m.atlas.manifold(), x).map_err(wrap)?;
                    let tau = partition_weights(&m.atlas, x).map_err(wrap)?;
                    for (c, chart) in m.atlas.charts().iter().enumerate() {
                        weights[(c, i)] = tau[c];
                        if tau[c] >= CHART_WEIGHT_THRESHOLD {
                            coords[c].set_column(i, &normal_coords(chart, x).map_err(wrap)?);
                        }
                    }
                }
                Ok(Features::Charted { coords, weights })
            }
        }
    }

    fn check_features(&self, features: &Features) -> Result<()> {
        match (self, features) {
            (GeoModel::Idnn(m), Features::Charted { coords, .. }) if coords.len() == m.atlas.len() => {
                Ok(())
            }
            (GeoModel::Ednn(_) | GeoModel::Tdnn(_), Features::Single(_)) => Ok(()),
            _ => Err(Error::InvalidSpec("features were computed for a different model".into())),
        }
    }

    /// Outputs (one column per selected sample).
    pub fn predict_features(&self, features: &Features, idx: &[usize]) -> Result<DMatrix<f64>> {
        self.check_features(features)?;
        match features {
            Features::Single(x) => self.networks()[0].forward_batch(&gather_columns(x, idx)),
            Features::Charted { coords, weights } => {
                let mut out = DMatrix::zeros(self.output_width(), idx.len());
                for (k, net) in self.networks().iter().enumerate() {
                    let (pos, cols) = active(weights, k, idx);
                    if pos.is_empty() {
                        continue;
                    }
                    let y = net.forward_batch(&gather_columns(&coords[k], &cols))?;
                    for (a, &j) in pos.iter().enumerate() {
                        let t = weights[(k, idx[j])];
                        out.column_mut(j).axpy(t, &y.column(a), 1.0);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Mean loss over the selected samples and its gradient for every network.
    pub fn gradients_features(
        &self,
        features: &Features,
        idx: &[usize],
        targets: &Targets,
        loss: LossKind,
    ) -> Result<(Vec<Gradients>, f64)> {
        self.check_features(features)?;
        if idx.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        match features {
            Features::Single(x) => {
                let net = &self.networks()[0];
                let cache = net.forward_cached(gather_columns(x, idx))?;
                let (value, d_out) = loss_and_grad(loss, cache.output(), targets)?;
                let (g, _) = net.backward_cached(&cache, &d_out, false)?;
                Ok((vec![g], value))
            }
            Features::Charted { coords, weights } => {
                let mut out = DMatrix::zeros(self.output_width(), idx.len());
                let mut caches = Vec::with_capacity(self.networks().len());
                for (k, net) in self.networks().iter().enumerate() {
                    let (pos, cols) = active(weights, k, idx);
                    if pos.is_empty() {
                        caches.push(None);
                        continue;
                    }
                    let cache = net.forward_cached(gather_columns(&coords[k], &cols))?;
                    for (a, &j) in pos.iter().enumerate() {
                        let t = weights[(k, idx[j])];
                        out.column_mut(j).axpy(t, &cache.output().column(a), 1.0);
                    }
                    caches.push(Some((pos, cache)));
                }
                let (value, d_out) = loss_and_grad(loss, &out, targets)?;
                let mut grads = Vec::with_capacity(caches.len());
                for (k, (net, cache)) in self.networks().iter().zip(caches).enumerate() {
                    let Some((pos, cache)) = cache else {
                        grads.push(Gradients::zeros_like(net));
                        continue;
                    };
                    let mut d_k = DMatrix::zeros(d_out.nrows(), pos.len());
                    for (a, &j) in pos.iter().enumerate() {
                        let t = weights[(k, idx[j])];
                        d_k.set_column(a, &(d_out.column(j) * t));
                    }
                    grads.push(net.backward_cached(&cache, &d_k, false)?.0);
                }
                Ok((grads, value))
            }
        }
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut network_files = Vec::new();
        for (k, net) in self.networks().iter().enumerate() {
            let name = format!("{stem}.net{k}.json");
            std::fs::write(dir.join(&name), net.to_checkpoint_json()?)?;
            network_files.push(name);
        }
        let doc = ModelDocument::describe(self, network_files);
        std::fs::write(dir.join(format!("{stem}.model.json")), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(format!("{stem}.model.json")))?;
        let doc: ModelDocument = serde_json::from_str(&text)?;
        let networks = doc
            .networks
            .iter()
            .map(|f| {
                NetworkCheckpoint::from_json(&std::fs::read_to_string(dir.join(f))?)?.into_params()
            })
            .collect::<Result<Vec<_>>>()?;
        doc.build(networks)
    }
}

/// `(batch positions, dataset columns)` of samples where chart `k` is active.
fn active(weights: &DMatrix<f64>, k: usize, idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    idx.iter()
        .enumerate()
        .filter(|(_, &i)| weights[(k, i)] >= CHART_WEIGHT_THRESHOLD)
        .map(|(j, &i)| (j, i))
        .unzip()
}

/// Mean-loss gradients of every network of `model` on a batch of points.
pub fn model_gradients(
    model: &GeoModel,
    points: &[ManifoldPoint],
    targets: &Targets,
    loss: LossKind,
) -> Result<(Vec<Gradients>, f64)> {
    let features = model.featurize(points)?;
    let idx: Vec<usize> = (0..points.len()).collect();
    model.gradients_features(&features, &idx, targets, loss)
}

/// JSON description of a model; networks live in separate checkpoint files.
///
/// Base points are stored as flat ambient coordinates (SPD matrices
/// row-major). Tangent frames are rebuilt with the default construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub kind: String,
    pub manifold: Manifold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub charts: Vec<ChartDocument>,
    pub networks: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartDocument {
    pub base_point: Vec<f64>,
    pub radius: f64,
    pub sharpness: f64,
}

impl ChartDocument {
    fn describe(chart: &Chart) -> Self {
        Self {
            base_point: flatten_point(chart.base()),
            radius: chart.radius(),
            sharpness: chart.sharpness(),
        }
    }
}

/// Row-major flat ambient coordinates.
pub fn flatten_point(p: &ManifoldPoint) -> Vec<f64> {
    match p {
        ManifoldPoint::Sphere(v) | ManifoldPoint::Preshape(v) => v.iter().copied().collect(),
        ManifoldPoint::Spd(m) => m.transpose().iter().copied().collect(),
    }
}

/// Inverse of [`flatten_point`], with validation.
pub fn unflatten_point(manifold: Manifold, xs: &[f64]) -> Result<ManifoldPoint> {
    match manifold {
        Manifold::Sphere { dim } if xs.len() == dim + 1 => {
            ManifoldPoint::sphere(DVector::from_column_slice(xs))
        }
        Manifold::Preshape { landmarks } if xs.len() == 2 * landmarks => {
            ManifoldPoint::preshape(DVector::from_column_slice(xs))
        }
        Manifold::Spd { size } if xs.len() == size * size => {
            ManifoldPoint::spd(DMatrix::from_row_slice(size, size, xs))
        }
        m => Err(Error::Shape(format!("{} coordinates for a point on {m}", xs.len()))),
    }
}

impl ModelDocument {
    fn describe(model: &GeoModel, networks: Vec<String>) -> Self {
        let (kind, embedding, charts) = match model {
            GeoModel::Ednn(m) => ("ednn", Some(m.embedding), vec![]),
            GeoModel::Tdnn(m) => ("tdnn", None, vec![ChartDocument::describe(&m.chart)]),
            GeoModel::Idnn(m) => (
                "idnn",
                None,
                m.atlas.charts().iter().map(ChartDocument::describe).collect(),
            ),
        };
        Self {
            kind: kind.into(),
            manifold: model.manifold(),
            embedding,
            charts,
            networks,
        }
    }

    fn build(self, mut networks: Vec<NetworkParams>) -> Result<GeoModel> {
        let charts = self
            .charts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let base = unflatten_point(self.manifold, &c.base_point)?;
                let frame = Chart::new(i, base.clone(), c.radius)?.frame().clone();
                Chart::with_frame(i, base, frame, c.radius, c.sharpness)
            })
            .collect::<Result<Vec<_>>>()?;
        match self.kind.as_str() {
            "ednn" => {
                let embedding = self
                    .embedding
                    .ok_or_else(|| Error::Parse("ednn model without embedding".into()))?;
                let net = networks.pop().ok_or_else(|| Error::Parse("missing network".into()))?;
                Ok(GeoModel::Ednn(EdnnModel::new(self.manifold, embedding, net)?))
            }
            "tdnn" => {
                let chart = charts
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Parse("tdnn model without base point".into()))?;
                let net = networks.pop().ok_or_else(|| Error::Parse("missing network".into()))?;
                Ok(GeoModel::Tdnn(TdnnModel::with_chart(chart, net)?))
            }
            "idnn" => Ok(GeoModel::Idnn(IdnnModel::new(Atlas::new(charts)?, networks)?)),
            other => Err(Error::Parse(format!("unknown model kind {other:?}"))),
        }
    }
}

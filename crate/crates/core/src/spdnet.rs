//! SPDNet: BiMap / ReEig layers on SPD matrices, a terminal map to a flat
//! feature vector, and a dense network on top.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::manifolds::linalg::{sym_eigen, sym_vec_len, symmetrize, unvec_sym, vec_sym, SymEigen};
use crate::manifolds::spd::{check_spd, check_symmetric, log_of, SpdRoots};
use crate::manifolds::{frechet_mean, log_euclidean_mean, ManifoldPoint};
use crate::nn::{
    adam_step, init_network, loss_and_grad, AdamState, Gradients, LossKind, NetworkCheckpoint,
    NetworkParams, Targets,
};
use crate::{rng_from_seed, Error, Result};

pub const DEFAULT_REEIG_EPSILON: f64 = 1e-4;
pub const SPDNET_CHECKPOINT_FORMAT: &str = "mnets-spdnet/1";

const ORTHONORMAL_TOLERANCE: f64 = 1e-8;
const RETRACTION_RANK_TOLERANCE: f64 = 1e-10;

/// `P ↦ WᵀPW` with `W` having orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BiMapLayer {
    w: DMatrix<f64>,
}

impl BiMapLayer {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.ncols() > w.nrows() || w.ncols() == 0 {
            return Err(Error::Shape(format!(
                "BiMap weight is {}x{}; it must be tall",
                w.nrows(),
                w.ncols()
            )));
        }
        let err = (w.transpose() * &w - DMatrix::identity(w.ncols(), w.ncols())).amax();
        if !(err <= ORTHONORMAL_TOLERANCE) {
            return Err(Error::Geometry(format!(
                "BiMap weight columns are not orthonormal (error {err:.3e})"
            )));
        }
        Ok(Self { w })
    }

    /// Orthonormalized Gaussian matrix, deterministic given the seed.
    pub fn random(input: usize, output: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let g = DMatrix::from_fn(input, output, |_, _| StandardNormal.sample(&mut rng));
        Self::new(qr_retract(g)?)
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn input_size(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_size(&self) -> usize {
        self.w.ncols()
    }
}

/// `U max(Σ, εI) Uᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReEigLayer {
    epsilon: f64,
}

impl ReEigLayer {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidSpec(format!("ReEig epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for ReEigLayer {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_REEIG_EPSILON,
        }
    }
}

pub fn bimap_forward(layer: &BiMapLayer, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.nrows() != layer.input_size() || !p.is_square() {
        return Err(Error::Shape(format!(
            "BiMap expects {n}x{n}, got {}x{}",
            p.nrows(),
            p.ncols(),
            n = layer.input_size()
        )));
    }
    Ok(symmetrize(&(layer.w.transpose() * p * &layer.w)))
}

pub fn reeig_forward(layer: &ReEigLayer, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(p)?;
    let eps = layer.epsilon;
    Ok(sym_eigen(p).map(|l| l.max(eps)))
}

/// `vec_sym(log P)`; the same map as the SPD embedding.
pub fn logeig_forward(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(vec_sym(&log_of(&check_spd(p)?)))
}

/// Gradient through `P ↦ WᵀPW`: returns `(∂L/∂P, ∂L/∂W)` for symmetric
/// `upstream = ∂L/∂(WᵀPW)`.
pub fn bimap_backward(
    layer: &BiMapLayer,
    p: &DMatrix<f64>,
    upstream: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = symmetrize(upstream);
    let w = &layer.w;
    let d_p = symmetrize(&(w * &g * w.transpose()));
    let d_w = p * w * &g * 2.0;
    (d_p, d_w)
}

/// Gradient through ReEig given the eigendecomposition of its input.
pub fn reeig_backward(layer: &ReEigLayer, eig: &SymEigen, upstream: &DMatrix<f64>) -> DMatrix<f64> {
    let eps = layer.epsilon;
    eig.backward(
        |l| l.max(eps),
        |l| if l > eps { 1.0 } else { 0.0 },
        upstream,
    )
}

/// Gradient through `P ↦ log P` given the eigendecomposition of `P`.
pub fn log_backward(eig: &SymEigen, upstream: &DMatrix<f64>) -> DMatrix<f64> {
    eig.backward(f64::ln, |l| 1.0 / l, upstream)
}

/// Riemannian gradient step on the Stiefel manifold followed by a QR
/// retraction.
pub fn stiefel_update(layer: &BiMapLayer, grad: &DMatrix<f64>, lr: f64) -> Result<BiMapLayer> {
    let w = &layer.w;
    if grad.shape() != w.shape() {
        return Err(Error::Shape(format!(
            "gradient {:?} for BiMap weight {:?}",
            grad.shape(),
            w.shape()
        )));
    }
    let riemannian = grad - w * symmetrize(&(w.transpose() * grad));
    BiMapLayer::new(qr_retract(w - riemannian * lr)?)
}

/// Q factor of a thin QR with the diagonal of R made positive.
fn qr_retract(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric {
            layer: 0,
            what: "non-finite BiMap weight".into(),
        });
    }
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        if d.abs() < RETRACTION_RANK_TOLERANCE * scale {
            return Err(Error::Numeric {
                layer: j,
                what: "rank-deficient Stiefel retraction".into(),
            });
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// How the last SPD matrix becomes a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalMap {
    /// `vec_sym(log P)`, the log map at the identity.
    LogEig,
    /// `vec_sym(log P − log P̄)` with `P̄` the log-Euclidean mean.
    LogEuclidean,
    /// `½ vec_sym(log(P̄^{-1/2} P P̄^{-1/2}))` with `P̄` the affine Fréchet mean.
    Affine,
}

impl TerminalMap {
    pub fn needs_base(&self) -> bool {
        !matches!(self, TerminalMap::LogEig)
    }
}

/// Precomputed base-point quantities for a terminal map.
#[derive(Debug, Clone)]
pub enum TerminalBase {
    Identity,
    /// `log P̄`.
    LogMean(DMatrix<f64>),
    /// `P̄^{-1/2}`.
    Whitener(DMatrix<f64>),
}

impl TerminalBase {
    /// Base quantities at the mean of `points` under the map's metric.
    pub fn at_mean(map: TerminalMap, points: &[DMatrix<f64>]) -> Result<Self> {
        let wrap = |ps: &[DMatrix<f64>]| -> Result<Vec<ManifoldPoint>> {
            ps.iter().map(|p| ManifoldPoint::spd(p.clone())).collect()
        };
        match map {
            TerminalMap::LogEig => Ok(TerminalBase::Identity),
            TerminalMap::LogEuclidean => {
                let mean = log_euclidean_mean(&wrap(points)?)?;
                Self::at(map, mean.as_matrix().unwrap())
            }
            TerminalMap::Affine => {
                let mean = match frechet_mean(&wrap(points)?) {
                    Err(Error::Convergence { last, .. }) => *last,
                    other => other?,
                };
                Self::at(map, mean.as_matrix().unwrap())
            }
        }
    }

    pub fn at(map: TerminalMap, base: &DMatrix<f64>) -> Result<Self> {
        match map {
            TerminalMap::LogEig => Ok(TerminalBase::Identity),
            TerminalMap::LogEuclidean => Ok(TerminalBase::LogMean(log_of(&check_spd(base)?))),
            TerminalMap::Affine => Ok(TerminalBase::Whitener(SpdRoots::new(base)?.inv_sqrt)),
        }
    }
}

/// Per-sample intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StackCache {
    /// Input to each BiMap layer.
    inputs: Vec<DMatrix<f64>>,
    /// Eigendecomposition of each ReEig input.
    reeig: Vec<SymEigen>,
    /// Eigendecomposition of the matrix whose log is taken.
    terminal: SymEigen,
    output: DMatrix<f64>,
}

/// BiMap/ReEig stack, terminal map and dense network.
#[derive(Debug, Clone)]
pub struct SpdNetModel {
    bimaps: Vec<BiMapLayer>,
    reeigs: Vec<ReEigLayer>,
    terminal: TerminalMap,
    /// Base point frozen after training; required for tangent terminals.
    frozen_base: Option<DMatrix<f64>>,
    pub network: NetworkParams,
}

/// Gradients of every trainable parameter of an [`SpdNetModel`].
#[derive(Debug, Clone)]
pub struct SpdNetGradients {
    pub bimaps: Vec<DMatrix<f64>>,
    pub network: Gradients,
}

impl SpdNetModel {
    pub fn new(
        bimaps: Vec<BiMapLayer>,
        reeigs: Vec<ReEigLayer>,
        terminal: TerminalMap,
        network: NetworkParams,
    ) -> Result<Self> {
        if bimaps.len() != reeigs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} BiMap layers but {} ReEig layers",
                bimaps.len(),
                reeigs.len()
            )));
        }
        for (i, pair) in bimaps.windows(2).enumerate() {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(Error::Shape(format!(
                    "BiMap {i} outputs {} but BiMap {} takes {}",
                    pair[0].output_size(),
                    i + 1,
                    pair[1].input_size()
                )));
            }
        }
        let m = sym_vec_len(bimaps.last().map_or(0, |b| b.output_size()));
        if bimaps.is_empty() || network.input_width() != m {
            return Err(Error::Shape(format!(
                "terminal network takes {} features but the stack produces {m}",
                network.input_width()
            )));
        }
        Ok(Self {
            bimaps,
            reeigs,
            terminal,
            frozen_base: None,
            network,
        })
    }

    /// `sizes` lists the matrix sizes `d = s_0 > s_1 > … > s_L`.
    pub fn init(
        sizes: &[usize],
        epsilon: f64,
        terminal: TerminalMap,
        hidden: &[usize],
        outputs: usize,
        seed: u64,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidSpec("SPDNet needs at least one BiMap layer".into()));
        }
        let bimaps = sizes
            .windows(2)
            .enumerate()
            .map(|(i, s)| BiMapLayer::random(s[0], s[1], seed.wrapping_add(1 + i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let reeigs = vec![ReEigLayer::new(epsilon)?; bimaps.len()];
        let mut widths = vec![sym_vec_len(*sizes.last().unwrap())];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        Self::new(bimaps, reeigs, terminal, init_network(&widths, seed)?)
    }

    pub fn bimaps(&self) -> &[BiMapLayer] {
        &self.bimaps
    }

    pub fn reeigs(&self) -> &[ReEigLayer] {
        &self.reeigs
    }

    pub fn terminal(&self) -> TerminalMap {
        self.terminal
    }

    pub fn input_size(&self) -> usize {
        self.bimaps[0].input_size()
    }

    pub fn frozen_base(&self) -> Option<&DMatrix<f64>> {
        self.frozen_base.as_ref()
    }

    pub fn set_frozen_base(&mut self, base: Option<DMatrix<f64>>) {
        self.frozen_base = base;
    }

    /// Output of the BiMap/ReEig stack.
    pub fn stack_forward(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_spd(p)?;
        let mut x = p.clone();
        for (b, r) in self.bimaps.iter().zip(&self.reeigs) {
            x = reeig_forward(r, &bimap_forward(b, &x)?)?;
        }
        Ok(x)
    }

    /// Freezes the terminal base point at the mean of the stack outputs.
    pub fn freeze_base(&mut self, points: &[DMatrix<f64>]) -> Result<()> {
        if !self.terminal.needs_base() {
            self.frozen_base = None;
            return Ok(());
        }
        let outs = self.stack_outputs(points)?;
        let base = match TerminalBase::at_mean(self.terminal, &outs)? {
            TerminalBase::LogMean(l) => sym_eigen(&l).map(f64::exp),
            TerminalBase::Whitener(w) => {
                let inv = w.clone().try_inverse().ok_or_else(|| {
                    Error::NotPositiveDefinite("singular mean of stack outputs".into())
                })?;
                symmetrize(&(&inv * &inv))
            }
            TerminalBase::Identity => unreachable!(),
        };
        self.frozen_base = Some(base);
        Ok(())
    }

    fn stack_outputs(&self, points: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| self.stack_forward(p).map_err(|e| e.at_sample(i)))
            .collect()
    }

    fn frozen_terminal_base(&self) -> Result<TerminalBase> {
        match (&self.frozen_base, self.terminal) {
            (_, TerminalMap::LogEig) => Ok(TerminalBase::Identity),
            (Some(b), t) => TerminalBase::at(t, b),
            (None, t) => Err(Error::InvalidSpec(format!(
                "{t:?} terminal map needs a frozen base point; call freeze_base after training"
            ))),
        }
    }

    fn sample_forward(&self, p: &DMatrix<f64>, base: &TerminalBase) -> Result<(DVector<f64>, StackCache)> {
        check_spd(p)?;
        let mut inputs = Vec::with_capacity(self.bimaps.len());
        let mut reeig = Vec::with_capacity(self.bimaps.len());
        let mut x = p.clone();
        for (l, (b, r)) in self.bimaps.iter().zip(&self.reeigs).enumerate() {
            let y = bimap_forward(b, &x)?;
            let eig = sym_eigen(&y);
            if !eig.values.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric {
                    layer: l,
                    what: "non-finite eigenvalue in ReEig".into(),
                });
            }
            inputs.push(x);
            let eps = r.epsilon;
            x = eig.map(|l| l.max(eps));
            reeig.push(eig);
        }
        let (terminal, feature) = match base {
            TerminalBase::Identity => {
                let eig = sym_eigen(&x);
                let f = vec_sym(&log_of(&eig));
                (eig, f)
            }
            TerminalBase::LogMean(lm) => {
                let eig = sym_eigen(&x);
                let f = vec_sym(&(log_of(&eig) - lm));
                (eig, f)
            }
            TerminalBase::Whitener(m) => {
                let eig = sym_eigen(&symmetrize(&(m * &x * m)));
                let f = vec_sym(&log_of(&eig)) * 0.5;
                (eig, f)
            }
        };
        if !feature.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric {
                layer: self.bimaps.len(),
                what: "non-finite terminal feature".into(),
            });
        }
        Ok((
            feature,
            StackCache {
                inputs,
                reeig,
                terminal,
                output: x,
            },
        ))
    }

    /// Backward through the terminal map and stack for one sample; adds the
    /// BiMap gradients into `acc` and returns `∂L/∂P_in`.
    fn sample_backward(
        &self,
        cache: &StackCache,
        base: &TerminalBase,
        d_feature: &DVector<f64>,
        acc: &mut [DMatrix<f64>],
    ) -> Result<DMatrix<f64>> {
        let n = cache.output.nrows();
        let mut g = match base {
            TerminalBase::Identity | TerminalBase::LogMean(_) => {
                log_backward(&cache.terminal, &unvec_sym(d_feature, n))
            }
            TerminalBase::Whitener(m) => {
                let inner = log_backward(&cache.terminal, &(unvec_sym(d_feature, n) * 0.5));
                symmetrize(&(m * inner * m))
            }
        };
        for l in (0..self.bimaps.len()).rev() {
            g = reeig_backward(&self.reeigs[l], &cache.reeig[l], &g);
            let (d_p, d_w) = bimap_backward(&self.bimaps[l], &cache.inputs[l], &g);
            if !d_w.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric {
                    layer: l,
                    what: "non-finite BiMap gradient".into(),
                });
            }
            acc[l] += d_w;
            g = d_p;
        }
        Ok(g)
    }

    fn features_with(
        &self,
        points: &[&DMatrix<f64>],
        base: &TerminalBase,
    ) -> Result<(DMatrix<f64>, Vec<StackCache>)> {
        let m = self.network.input_width();
        let mut z = DMatrix::zeros(m, points.len());
        let mut caches = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let (f, c) = self.sample_forward(p, base).map_err(|e| e.at_sample(i))?;
            z.set_column(i, &f);
            caches.push(c);
        }
        Ok((z, caches))
    }

    /// Network outputs (one column per point) using the frozen base.
    pub fn predict(&self, points: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let base = self.frozen_terminal_base()?;
        let (z, _) = self.features_with(points, &base)?;
        self.network.forward_batch(&z)
    }

    pub fn forward(&self, p: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.predict(&[p])?.column(0).into_owned())
    }

    /// Mean loss and gradients on a batch. With `batch_base` the terminal
    /// base point is the mean of this batch's stack outputs (held constant
    /// in the backward pass); otherwise the frozen base is used.
    pub fn batch_gradients(
        &self,
        points: &[&DMatrix<f64>],
        targets: &Targets,
        loss: LossKind,
        batch_base: bool,
    ) -> Result<(SpdNetGradients, f64)> {
        self.gradients_with_inputs(points, targets, loss, batch_base)
            .map(|(g, l, _)| (g, l))
    }

    /// As [`Self::batch_gradients`], also returning `∂L/∂P` per input.
    pub fn gradients_with_inputs(
        &self,
        points: &[&DMatrix<f64>],
        targets: &Targets,
        loss: LossKind,
        batch_base: bool,
    ) -> Result<(SpdNetGradients, f64, Vec<DMatrix<f64>>)> {
        if points.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let base = if batch_base && self.terminal.needs_base() {
            let outs = points
                .iter()
                .enumerate()
                .map(|(i, p)| self.stack_forward(p).map_err(|e| e.at_sample(i)))
                .collect::<Result<Vec<_>>>()?;
            TerminalBase::at_mean(self.terminal, &outs)?
        } else {
            self.frozen_terminal_base()?
        };
        let (z, caches) = self.features_with(points, &base)?;
        let cache = self.network.forward_cached(z)?;
        let (value, d_out) = loss_and_grad(loss, cache.output(), targets)?;
        let (network, d_z) = self.network.backward_cached(&cache, &d_out, true)?;
        let d_z = d_z.expect("input gradient requested");
        let mut bimaps: Vec<DMatrix<f64>> =
            self.bimaps.iter().map(|b| DMatrix::zeros(b.input_size(), b.output_size())).collect();
        let mut inputs = Vec::with_capacity(points.len());
        for (i, c) in caches.iter().enumerate() {
            let d = self
                .sample_backward(c, &base, &d_z.column(i).into_owned(), &mut bimaps)
                .map_err(|e| e.at_sample(i))?;
            inputs.push(d);
        }
        Ok((SpdNetGradients { bimaps, network }, value, inputs))
    }

    /// Adam on the dense network, Riemannian SGD on the BiMap weights.
    pub fn apply_gradients(
        &mut self,
        grads: &SpdNetGradients,
        adam: &mut AdamState,
        stiefel_lr: f64,
    ) -> Result<()> {
        let updated = self
            .bimaps
            .iter()
            .zip(&grads.bimaps)
            .map(|(b, g)| stiefel_update(b, g, stiefel_lr))
            .collect::<Result<Vec<_>>>()?;
        adam_step(&mut self.network, &grads.network, adam)?;
        self.bimaps = updated;
        Ok(())
    }

    /// Mutable access for finite-difference checks and custom optimizers.
    /// Callers are responsible for keeping columns orthonormal.
    pub fn bimap_weight_mut_unchecked(&mut self, layer: usize) -> &mut DMatrix<f64> {
        &mut self.bimaps[layer].w
    }

    pub fn to_checkpoint(&self) -> SpdNetCheckpoint {
        let row_major = |m: &DMatrix<f64>| m.transpose().iter().copied().collect::<Vec<_>>();
        SpdNetCheckpoint {
            format: SPDNET_CHECKPOINT_FORMAT.into(),
            bimaps: self
                .bimaps
                .iter()
                .map(|b| BiMapRecord {
                    rows: b.input_size(),
                    cols: b.output_size(),
                    weights: row_major(&b.w),
                })
                .collect(),
            epsilons: self.reeigs.iter().map(|r| r.epsilon).collect(),
            terminal: self.terminal,
            base: self.frozen_base.as_ref().map(row_major),
            network: NetworkCheckpoint::from(&self.network),
        }
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        serde_json::from_str::<SpdNetCheckpoint>(text)?.into_model()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiMapRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub weights: Vec<f64>,
}

/// The dense-network checkpoint extended with the SPD layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpdNetCheckpoint {
    pub format: String,
    pub bimaps: Vec<BiMapRecord>,
    pub epsilons: Vec<f64>,
    pub terminal: TerminalMap,
    /// Frozen terminal base point, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
    pub network: NetworkCheckpoint,
}

impl SpdNetCheckpoint {
    pub fn into_model(self) -> Result<SpdNetModel> {
        if self.format != SPDNET_CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unknown checkpoint format {:?}", self.format)));
        }
        let bimaps = self
            .bimaps
            .iter()
            .map(|r| {
                if r.weights.len() != r.rows * r.cols {
                    return Err(Error::Parse("BiMap record has the wrong length".into()));
                }
                BiMapLayer::new(DMatrix::from_row_slice(r.rows, r.cols, &r.weights))
            })
            .collect::<Result<Vec<_>>>()?;
        let reeigs = self
            .epsilons
            .iter()
            .map(|&e| ReEigLayer::new(e))
            .collect::<Result<Vec<_>>>()?;
        let mut model = SpdNetModel::new(bimaps, reeigs, self.terminal, self.network.into_params()?)?;
        if let Some(b) = self.base {
            let n = model.bimaps.last().unwrap().output_size();
            if b.len() != n * n {
                return Err(Error::Parse("frozen base has the wrong length".into()));
            }
            let base = DMatrix::from_row_slice(n, n, &b);
            check_spd(&base)?;
            model.frozen_base = Some(base);
        }
        Ok(model)
    }
}

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::nn::loss::{loss_and_grad, LossKind, Targets};
use crate::{rng_from_seed, Error, Result};

/// Weights and biases of a dense ReLU network.
///
/// Layer `l` (zero-based) maps `widths[l]` inputs to `widths[l + 1]`
/// outputs, so `weights[l]` is `widths[l + 1] × widths[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    widths: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

/// Gradient record laid out exactly like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// `‖θ‖_0` and `‖θ‖_∞` of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityReport {
    pub nonzero: usize,
    pub max_abs: f64,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input batch, `activations[l]` the output of
    /// hidden layer `l` after the ReLU.
    activations: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        &self.output
    }

    pub fn into_output(self) -> DMatrix<f64> {
        self.output
    }

    pub fn batch_len(&self) -> usize {
        self.output.ncols()
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "network needs an input, at least one hidden layer and an output; got widths {widths:?}"
        )));
    }
    if let Some(pos) = widths.iter().position(|&w| w == 0) {
        return Err(Error::InvalidSpec(format!(
            "layer width at position {pos} is zero in {widths:?}"
        )));
    }
    Ok(())
}

/// He-initialized network: weights `N(0, 2 / fan_in)`, zero biases.
pub fn init_network(widths: &[usize], seed: u64) -> Result<NetworkParams> {
    validate_widths(widths)?;
    let mut rng = rng_from_seed(seed);
    let mut weights = Vec::with_capacity(widths.len() - 1);
    let mut biases = Vec::with_capacity(widths.len() - 1);
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        // Draw row-major so the stream does not depend on storage order.
        let mut w = DMatrix::zeros(fan_out, fan_in);
        for r in 0..fan_out {
            for c in 0..fan_in {
                w[(r, c)] = normal.sample(&mut rng);
            }
        }
        weights.push(w);
        biases.push(DVector::zeros(fan_out));
    }
    Ok(NetworkParams {
        widths: widths.to_vec(),
        weights,
        biases,
    })
}

impl NetworkParams {
    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut widths = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *widths.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer {l} expects {} inputs but previous layer has {} outputs",
                    w.ncols(),
                    widths.last().unwrap()
                )));
            }
            if b.len() != w.nrows() {
                return Err(Error::Shape(format!(
                    "layer {l} has {} rows but bias of length {}",
                    w.nrows(),
                    b.len()
                )));
            }
            widths.push(w.nrows());
        }
        validate_widths(&widths)?;
        Ok(Self {
            widths,
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of affine layers, `L + 1`.
    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &DMatrix<f64> {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &DVector<f64> {
        &self.biases[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut DMatrix<f64> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut DVector<f64> {
        &mut self.biases[layer]
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// All parameters, layer by layer, weights (column-major) before biases.
    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    /// Mutable view in the same order as [`NetworkParams::parameters`].
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Multiplies every weight matrix by `c`, leaving biases untouched.
    pub fn scale_weights(&mut self, c: f64) {
        for w in &mut self.weights {
            *w *= c;
        }
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_width() {
            return Err(Error::Shape(format!(
                "network expects inputs of length {} but got {rows}",
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Evaluates a batch (one sample per column).
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(inputs.nrows())?;
        let last = self.layer_count() - 1;
        let mut a = affine(&self.weights[0], &self.biases[0], inputs);
        for l in 1..=last {
            relu_in_place(&mut a);
            a = affine(&self.weights[l], &self.biases[l], &a);
        }
        Ok(a)
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_cached(&self, inputs: DMatrix<f64>) -> Result<ForwardCache> {
        self.check_input(inputs.nrows())?;
        let mut activations = Vec::with_capacity(self.layer_count());
        activations.push(inputs);
        for l in 0..self.layer_count() - 1 {
            let mut z = affine(&self.weights[l], &self.biases[l], activations.last().unwrap());
            relu_in_place(&mut z);
            activations.push(z);
        }
        let last = self.layer_count() - 1;
        let output = affine(
            &self.weights[last],
            &self.biases[last],
            activations.last().unwrap(),
        );
        Ok(ForwardCache {
            activations,
            output,
        })
    }

    /// Reverse pass given `∂loss/∂output` for every column of the cached
    /// batch. Gradients are summed over the batch; fold any `1/n` into
    /// `d_output`. Returns `∂loss/∂input` when `want_input` is set.
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        d_output: &DMatrix<f64>,
        want_input: bool,
    ) -> Result<(Gradients, Option<DMatrix<f64>>)> {
        if d_output.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?} but network output is {:?}",
                d_output.shape(),
                cache.output.shape()
            )));
        }
        let n_layers = self.layer_count();
        let mut grad_w = Vec::with_capacity(n_layers);
        let mut grad_b = Vec::with_capacity(n_layers);
        let mut delta = d_output.clone();
        let mut d_input = None;
        for l in (0..n_layers).rev() {
            let a_prev = &cache.activations[l];
            grad_w.push(&delta * a_prev.transpose());
            grad_b.push(row_sums(&delta));
            if l > 0 {
                let mut back = self.weights[l].tr_mul(&delta);
                back.zip_apply(a_prev, |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            } else if want_input {
                d_input = Some(self.weights[0].tr_mul(&delta));
            }
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
            d_input,
        ))
    }
}

fn affine(w: &DMatrix<f64>, b: &DVector<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = w * a;
    for mut col in z.column_iter_mut() {
        col += b;
    }
    z
}

fn relu_in_place(z: &mut DMatrix<f64>) {
    z.apply(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        out += col;
    }
    out
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            weights: params
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            biases: params.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    /// Same iteration order as [`NetworkParams::parameters`].
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            *w *= c;
        }
        for b in &mut self.biases {
            *b *= c;
        }
    }

    /// Index of the first layer holding a NaN or infinite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .position(|(w, b)| w.iter().chain(b.iter()).any(|v| !v.is_finite()))
    }

    fn conforms_to(&self, params: &NetworkParams) -> bool {
        self.weights.len() == params.weights.len()
            && self
                .weights
                .iter()
                .zip(&params.weights)
                .all(|(g, w)| g.shape() == w.shape())
            && self
                .biases
                .iter()
                .zip(&params.biases)
                .all(|(g, b)| g.len() == b.len())
    }

    pub(crate) fn check_conforms(&self, params: &NetworkParams) -> Result<()> {
        if self.conforms_to(params) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "gradient record does not match network widths {:?}",
                params.widths
            )))
        }
    }
}

/// Evaluates a single input vector.
pub fn forward(params: &NetworkParams, x: &DVector<f64>) -> Result<DVector<f64>> {
    let out = params.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x.as_slice()))?;
    Ok(out.column(0).into_owned())
}

/// Mean batch loss and its gradient with respect to every parameter.
pub fn backward(
    params: &NetworkParams,
    inputs: &DMatrix<f64>,
    targets: &Targets,
    loss: LossKind,
) -> Result<(Gradients, f64)> {
    if inputs.ncols() == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let cache = params.forward_cached(inputs.clone())?;
    let (value, d_out) = loss_and_grad(loss, cache.output(), targets)?;
    let (grads, _) = params.backward_cached(&cache, &d_out, false)?;
    Ok((grads, value))
}

pub fn sparsity_report(params: &NetworkParams) -> SparsityReport {
    params.parameters().fold(
        SparsityReport {
            nonzero: 0,
            max_abs: 0.0,
        },
        |acc, &v| SparsityReport {
            nonzero: acc.nonzero + usize::from(v != 0.0),
            max_abs: acc.max_abs.max(v.abs()),
        },
    )
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Mean of `(y - f(x))^2`; the network must have a single output.
    SquaredError,
    /// Softmax cross-entropy over one logit per class.
    CrossEntropy,
}

/// Regression values or class labels, one per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Targets {
    Labels { labels: Vec<usize>, classes: usize },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Targets at the given sample indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
            Targets::Values(v) => Targets::Values(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            Targets::Labels { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Targets::Values(v) => Some(v),
            Targets::Labels { .. } => None,
        }
    }

    pub fn class_count(&self) -> Option<usize> {
        match self {
            Targets::Labels { classes, .. } => Some(*classes),
            Targets::Values(_) => None,
        }
    }

    /// Output width a network needs to be trained on these targets.
    pub fn output_width(&self) -> usize {
        self.class_count().unwrap_or(1)
    }

    pub fn default_loss(&self) -> LossKind {
        match self {
            Targets::Labels { .. } => LossKind::CrossEntropy,
            Targets::Values(_) => LossKind::SquaredError,
        }
    }
}

/// Mean loss over the batch and `∂loss/∂outputs` (already divided by `n`).
pub fn loss_and_grad(
    kind: LossKind,
    outputs: &DMatrix<f64>,
    targets: &Targets,
) -> Result<(f64, DMatrix<f64>)> {
    let n = outputs.ncols();
    if n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!(
            "{n} outputs but {} targets",
            targets.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    match (kind, targets) {
        (LossKind::SquaredError, Targets::Values(y)) => {
            if outputs.nrows() != 1 {
                return Err(Error::Shape(format!(
                    "squared error needs a scalar output, network emits {}",
                    outputs.nrows()
                )));
            }
            let mut grad = DMatrix::zeros(1, n);
            let mut total = 0.0;
            for (i, &yi) in y.iter().enumerate() {
                let r = outputs[(0, i)] - yi;
                total += r * r;
                grad[(0, i)] = 2.0 * r * inv_n;
            }
            Ok((total * inv_n, grad))
        }
        (LossKind::CrossEntropy, Targets::Labels { labels, classes }) => {
            if outputs.nrows() != *classes {
                return Err(Error::Shape(format!(
                    "cross-entropy over {classes} classes needs {classes} logits, got {}",
                    outputs.nrows()
                )));
            }
            let mut grad = DMatrix::zeros(*classes, n);
            let mut total = 0.0;
            for (i, &label) in labels.iter().enumerate() {
                if label >= *classes {
                    return Err(Error::Shape(format!(
                        "label {label} out of range for {classes} classes"
                    )));
                }
                let col = outputs.column(i);
                let max = col.max();
                let sum_exp: f64 = col.iter().map(|v| (v - max).exp()).sum();
                let log_z = max + sum_exp.ln();
                total += log_z - col[label];
                for c in 0..*classes {
                    let p = (col[c] - log_z).exp();
                    grad[(c, i)] = (p - f64::from(u8::from(c == label))) * inv_n;
                }
            }
            Ok((total * inv_n, grad))
        }
        (kind, _) => Err(Error::InvalidSpec(format!(
            "loss {kind:?} does not match the target kind"
        ))),
    }
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::train::TrainedModel;
use crate::nn::Targets;
use crate::synthdata::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Fraction of samples whose argmax output equals the label.
    Accuracy,
    /// Mean squared error of the first output against the targets.
    Risk,
}

impl Metric {
    pub fn for_targets(targets: &Targets) -> Self {
        match targets {
            Targets::Labels { .. } => Metric::Accuracy,
            Targets::Values(_) => Metric::Risk,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(column: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in column.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn evaluate_outputs(outputs: &DMatrix<f64>, targets: &Targets, metric: Metric) -> Result<f64> {
    if outputs.ncols() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            outputs.ncols(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    match (metric, targets) {
        (Metric::Accuracy, Targets::Labels { labels, .. }) => {
            let hits = outputs
                .column_iter()
                .zip(labels)
                .filter(|(c, &l)| argmax(c.iter().copied()) == l)
                .count();
            Ok(hits as f64 / n)
        }
        (Metric::Risk, Targets::Values(ys)) => {
            Ok(outputs.row(0).iter().zip(ys).map(|(f, y)| (f - y).powi(2)).sum::<f64>() / n)
        }
        (m, _) => Err(Error::InvalidSpec(format!("{m:?} does not apply to these targets"))),
    }
}

pub fn evaluate(model: &TrainedModel, data: &Dataset, metric: Metric) -> Result<f64> {
    evaluate_outputs(&model.predict(data.inputs())?, data.targets(), metric)
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::nn::network::NetworkParams;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mnets-mlp/1";

/// JSON checkpoint of a dense network.
///
/// ```json
/// {"format": "mnets-mlp/1",
///  "widths": [p0, p1, ..., pL1],
///  "layers": [{"weights": [row-major p_l * p_{l-1} values], "bias": [p_l values]}, ...]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub widths: Vec<usize>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&NetworkParams> for NetworkCheckpoint {
    fn from(params: &NetworkParams) -> Self {
        let layers = (0..params.layer_count())
            .map(|l| {
                let w = params.weight(l);
                let mut row_major = Vec::with_capacity(w.len());
                for r in 0..w.nrows() {
                    row_major.extend(w.row(r).iter());
                }
                LayerRecord {
                    weights: row_major,
                    bias: params.bias(l).iter().copied().collect(),
                }
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            widths: params.widths().to_vec(),
            layers,
        }
    }
}

impl NetworkCheckpoint {
    pub fn into_params(self) -> Result<NetworkParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported checkpoint format {:?}",
                self.format
            )));
        }
        if self.layers.len() + 1 != self.widths.len() {
            return Err(Error::Shape(format!(
                "{} layers for widths {:?}",
                self.layers.len(),
                self.widths
            )));
        }
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.into_iter().enumerate() {
            let (rows, cols) = (self.widths[l + 1], self.widths[l]);
            if layer.weights.len() != rows * cols {
                return Err(Error::Shape(format!(
                    "layer {l}: expected {} weights, found {}",
                    rows * cols,
                    layer.weights.len()
                )));
            }
            weights.push(DMatrix::from_row_slice(rows, cols, &layer.weights));
            biases.push(DVector::from_vec(layer.bias));
        }
        NetworkParams::from_layers(weights, biases)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl NetworkParams {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        NetworkCheckpoint::from(self).to_json()
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        NetworkCheckpoint::from_json(text)?.into_params()
    }
}

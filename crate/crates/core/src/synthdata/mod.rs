//! Synthetic data: von Mises–Fisher mixtures, planar shapes, SPD classes
//! and smooth regression on the sphere.

mod generators;
mod vmf;

use serde::{Deserialize, Serialize};

use crate::manifolds::{Manifold, ManifoldPoint};
use crate::nn::Targets;
use crate::{Error, Result};

pub use generators::{
    ellipse_template, gen_planar_shapes, gen_regression_sphere, gen_spd_dataset,
    random_spd_bases, sample_mixture, MixtureSpec, RegressionTarget, ShapeSpec, SpdClassSpec,
};
pub use vmf::{sample_vmf, sample_vmf_with, uniform_sphere, VmfParams};

/// Where a dataset came from: generator name, its parameters, and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    pub spec: serde_json::Value,
}

impl Provenance {
    pub fn new(generator: &str, seed: Option<u64>, spec: impl Serialize) -> Self {
        Self {
            generator: generator.into(),
            seed,
            spec: serde_json::to_value(spec).unwrap_or(serde_json::Value::Null),
        }
    }
}

/// Points on one manifold paired with labels or real targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    manifold: Manifold,
    inputs: Vec<ManifoldPoint>,
    targets: Targets,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        manifold: Manifold,
        inputs: Vec<ManifoldPoint>,
        targets: Targets,
        provenance: Provenance,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(i) = inputs.iter().position(|x| x.manifold() != manifold) {
            return Err(Error::Sample {
                index: i,
                source: Box::new(Error::InvalidSpec(format!(
                    "point on {} in a dataset on {manifold}",
                    inputs[i].manifold()
                ))),
            });
        }
        if let Targets::Labels { labels, classes } = &targets {
            if let Some(i) = labels.iter().position(|&l| l >= *classes) {
                return Err(Error::InvalidSpec(format!(
                    "label {} of sample {i} is out of range for {classes} classes",
                    labels[i]
                )));
            }
        }
        Ok(Self {
            manifold,
            inputs,
            targets,
            provenance,
        })
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn inputs(&self) -> &[ManifoldPoint] {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Labels { .. })
    }

    /// The samples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            manifold: self.manifold,
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: self.targets.select(idx),
            provenance: self.provenance.clone(),
        }
    }
}

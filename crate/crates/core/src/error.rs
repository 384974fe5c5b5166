use thiserror::Error;

use crate::manifolds::ManifoldPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in layer {layer}: {what}")]
    Numeric { layer: usize, what: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("point lies on the cut locus of the base point: {0}")]
    CutLocus(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("no chart covers point {0}")]
    CoverageGap(String),

    #[error("iteration did not converge after {iterations} steps (last step norm {step_norm:e})")]
    Convergence {
        iterations: usize,
        step_norm: f64,
        last: Box<ManifoldPoint>,
    },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the index of the dataset sample that produced it.
    pub fn at_sample(self, index: usize) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                index,
                source: Box::new(e),
            },
        }
    }

    /// True for errors rooted in the geometry of the inputs rather than numerics.
    pub fn is_geometric(&self) -> bool {
        match self {
            Error::Geometry(_)
            | Error::CutLocus(_)
            | Error::NotPositiveDefinite(_)
            | Error::DegenerateShape(_)
            | Error::CoverageGap(_) => true,
            Error::Sample { source, .. } => source.is_geometric(),
            _ => false,
        }
    }
}

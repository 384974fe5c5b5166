//! Feedforward networks on Riemannian manifolds.
//!
//! Three ways of feeding manifold-valued inputs to a dense ReLU network are
//! provided:
//!
//! - **eDNN**: embed the manifold into a Euclidean space (`f = g ∘ J`).
//! - **tDNN**: pull inputs into the tangent space at one base point through
//!   the log map and use normal coordinates.
//! - **iDNN**: blend one network per chart of an atlas with a smooth
//!   partition of unity, `f(x) = Σ_k τ_k(x) f_k(log_{x_k} x)`.
//!
//! Geometry kernels cover the sphere `S^d`, the planar preshape sphere of
//! `k`-landmark configurations and the SPD cone. SPDNet layers (BiMap,
//! ReEig, LogEig) are available for matrix-valued inputs.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod io;
pub mod manifolds;
pub mod models;
pub mod nn;
pub mod spdnet;
pub mod synthdata;

pub use error::{Error, Result};

use rand::SeedableRng;

/// Deterministic random stream used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's random stream from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent child seed for stream `stream` of `seed` (SplitMix64 mix).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Dense ReLU networks with reverse-mode gradients and Adam.
//!
//! A network with width vector `(p_0, …, p_{L+1})` computes
//! `A_{L+1} ∘ σ ∘ A_L ∘ … ∘ σ ∘ A_1` where `A_l(x) = W_l x + b_l` and
//! `σ(z) = max(0, z)` elementwise. There is no activation after the last
//! affine map.
//!
//! Batches are stored column-wise: a `p × n` matrix holds `n` samples.

mod adam;
mod checkpoint;
mod loss;
mod network;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{CHECKPOINT_FORMAT, NetworkCheckpoint};
pub use loss::{loss_and_grad, LossKind, Targets};
pub use network::{
    backward, forward, init_network, sparsity_report, ForwardCache, Gradients, NetworkParams,
    SparsityReport,
};

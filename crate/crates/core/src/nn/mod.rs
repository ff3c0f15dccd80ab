//! From-scratch multilayer perceptron: forward and backward passes,
//! per-input parameter Jacobians, the α-scaled prediction wrapper and its
//! training step, and the linearized (first-order Taylor) model.

mod alpha;
mod fit;
mod linearized;
mod loss;
mod mlp;

pub use alpha::{alpha_predict, train_step, AlphaModel, Batch, BatchSize, TrainConfig};
pub use fit::{evaluate, fit, per_example, BatchSampler};
pub use linearized::{linearized_predict, LinearizedModel};
pub use loss::{loss_and_grad, mean_loss, LossKind};
pub use mlp::{forward, init_mlp, jacobian_features, Activation, InitScheme, MlpConfig, ModelState};

pub(crate) use mlp::forward_cached;

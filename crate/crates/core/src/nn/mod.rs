//! Minimal layer-based neural-network engine.
//!
//! Tensors are `batch x height x width x channels`, row-major. Every layer
//! exposes a forward function and an exact backward function; there is no
//! general autodiff.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod layer;
pub mod loss;
pub mod params;
pub mod pool;
pub mod real;
pub mod tensor;

pub use activation::{relu, relu_backward};
pub use batchnorm::{batchnorm_backward, batchnorm_infer, batchnorm_train, BatchNormParams};
pub use conv::{conv2d_backward, conv2d_forward, ConvGeometry};
pub use dense::{fc_backward, fc_forward};
pub use layer::{LayerKind, LayerSpec};
pub use loss::{softmax, softmax_xent};
pub use params::{init_params, Gradients, LayerParams, ParamRole, ParamStore, WeightInit};
pub use pool::{maxpool_backward, maxpool_forward, PoolGeometry, PoolIndex};
pub use real::Real;
pub use tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

//! Minimal dense tensor, the convolution / dense layer set used by the
//! backbone, heads and baselines, and SGD / Adam optimizers.

pub mod conv;
pub mod layers;
pub mod optim;
pub mod tensor;

pub use conv::{conv2d, conv2d_backward, ConvGrads, Padding};
pub use layers::{
    global_avg_pool, global_avg_pool_backward, linear, linear_backward, relu, relu_backward, softmax, softmax_backward,
    Conv2d, Linear,
};
pub use optim::{NamedParam, OptimizerKind, OptimizerState};
pub use tensor::{Real, Tensor};

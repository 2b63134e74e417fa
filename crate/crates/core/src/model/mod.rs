//! Small differentiable classifiers.
//!
//! Two architectures share one code path: softmax regression, whose
//! penultimate features are the raw inputs, and a network with one `tanh`
//! hidden layer. In both, the output layer maps penultimate features `h` to
//! logits, and its gradient for one sample is the outer product
//! `(softmax(z) - onehot(y)) [h; 1]^T`.

mod forward;
mod grads;
mod params;
mod sgd;

pub use forward::{loss, predict, predict_proba};
pub use grads::{
    labelwise_validation_grads, mean_last_layer_grad, per_sample_last_layer_grads, ClassGradientRows,
    LastLayerGradient,
};
pub use params::{init_params, Arch, LayerSlice, ModelSpec, ParamVector};
pub use sgd::{full_gradient, sgd_epochs, Prox, SgdConfig};

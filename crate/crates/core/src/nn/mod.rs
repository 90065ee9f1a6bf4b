//! Minimal dense CNN engine: layers, taped forward pass, reverse-mode
//! gradients, cross-entropy loss and SGD.

pub mod autodiff;
pub mod layers;
pub mod loss;
pub mod optim;

pub use autodiff::{backward_pass, backward_pass_with_input, forward_pass, ForwardTape, LayerCache, LayerRecord, ParamGrads};
pub use layers::{chain_output_shape, LayerParams, LayerSpec, Params};
pub use loss::{argmax, softmax, softmax_cross_entropy};
pub use optim::sgd_step;

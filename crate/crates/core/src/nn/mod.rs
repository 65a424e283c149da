//! A small, fully self-contained CNN engine with exact backpropagation.
//!
//! Built around the two convolution forms the experiment compares: standard
//! multichannel 2D convolution and depthwise separable convolution (a
//! per-channel spatial filter followed by a 1x1 pointwise mix). With `c`
//! channels and a `k`-element receptive field the separable form carries
//! `c*k + c*c` weights per `c -> c` convolution against `c*k*c` for the
//! standard form — fewer whenever `k > 1`.
//!
//! Everything is f64 end to end; reductions accumulate in declaration
//! order, so equal seeds give bitwise-equal training runs.

mod checkpoint;
mod conv;
mod layers;
mod model;
mod tensor;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use checkpoint::{load_model, save_model};
pub use conv::{
    conv2d, conv2d_backward, conv_vs_separable_weights, depthwise_conv2d,
    depthwise_conv2d_backward, pointwise_conv2d, pointwise_conv2d_backward, sepconv2d, ConvKernel,
    DepthwiseKernel, PointwiseKernel,
};
pub use layers::ParamBlock;
pub use model::{
    build_model, count_params, softmax, train_step, weighted_xent, Adam, ClassWeights, LayerParams,
    Model, ModelConfig, ModelVariant, ParamCounts,
};
pub use tensor::FeatureMap;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },
    #[error("non-finite loss; training diverged")]
    Divergence,
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

//! Trainable classifiers: a compact conv net trained with label-smoothed
//! cross-entropy and step-decayed SGD, and a logistic-regression baseline over
//! hand-crafted features.
//!
//! Network code is generic over [`Real`]: training runs in `f32` for speed,
//! gradient checks run the very same code in `f64`.

pub mod checkpoint;
pub mod convnet;
pub mod layers;
pub mod linear;
pub mod loss;
pub mod tensor;
pub mod train;

pub use convnet::{ConvNet, ConvNetSpec, LayerSpec};
pub use linear::{train_linear, train_linear_weighted, LinearConfig, LinearFitReport, LogisticModel};
pub use loss::{smoothed_ce, softmax2};
pub use tensor::Tensor;
pub use train::{lr_at_epoch, train_step, Sgd, SmoothingDraw, TrainConfig};

use std::fmt::{Debug, Display};

/// Floating-point element type for network parameters and activations.
pub trait Real:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::ops::AddAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

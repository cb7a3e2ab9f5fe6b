//! From-scratch differentiable layers for the bidirectional LSTM classifier,
//! with RMSprop and a finite-difference gradient checker.
//!
//! Sequence activations are stored time-major as `(T * B, F)` matrices: row
//! `t * B + b` holds sample `b` at step `t`. A matching `(T * B)` vector of
//! 0/1 flags marks real (unpadded) steps.

mod batchnorm;
mod blstm;
pub mod checkpoint;
mod dense;
mod dropout;
pub mod gradcheck;
mod loss;
mod lstm;
mod model;
mod optimizer;

pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, RunningStats,
};
pub use blstm::{blstm_backward, blstm_forward, BlstmCache, BlstmParams};
pub use dense::{dense_backward, dense_forward, prelu_backward, prelu_forward, DenseParams};
pub use dropout::dropout_forward;
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{lstm_step, LstmParams, LstmStep};
pub use model::{
    HeadCache, HeadSelection, InputNorm, LossParts, Model, ModelConfig, Params, StackForward,
};
pub use optimizer::{rmsprop_step, OptimizerConfig, OptimizerState};

pub(crate) use loss::row_cross_entropy;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Train mode uses batch statistics and active dropout; infer mode uses
/// running statistics and no dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Role of a learnable tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum ParamKind {
    LstmInputWeight,
    LstmRecurrentWeight,
    LstmBias,
    BnGain,
    BnBias,
    DenseWeight,
    DenseBias,
    PreluSlope,
}

impl ParamKind {
    /// Whether the L2 penalty applies to this tensor.
    pub fn is_weight(self) -> bool {
        matches!(
            self,
            ParamKind::LstmInputWeight | ParamKind::LstmRecurrentWeight | ParamKind::DenseWeight
        )
    }
}

/// Read-only view of one named tensor.
pub struct ParamView<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct ParamViewMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

/// A collection of named tensors visited in a fixed order.
///
/// Gradients and optimizer accumulators reuse the parameter type, so
/// parameter, gradient and state tensors line up by position.
pub trait ParamSet {
    fn views(&self) -> Vec<ParamView<'_>>;
    fn views_mut(&mut self) -> Vec<ParamViewMut<'_>>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for v in z.views_mut() {
            v.data.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.views().iter().map(|v| v.data.len()).sum()
    }
}

pub(crate) fn check_finite(what: &str, data: &Array2<f64>) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFault(what.to_string()))
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;

use super::lstm::{view, view_mut};
use super::{ParamKind, ParamView, ParamViewMut};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Affine layer `y = x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `(out, in)`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseParams {
    /// Glorot-uniform weights, zero bias.
    pub fn init(input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (input_dim + output_dim) as f64).sqrt();
        DenseParams {
            weight: Array2::from_shape_simple_fn((output_dim, input_dim), || {
                rng.random_range(-bound..bound)
            }),
            bias: Array1::zeros(output_dim),
        }
    }

    pub fn identity(n: usize) -> Self {
        DenseParams {
            weight: Array2::eye(n),
            bias: Array1::zeros(n),
        }
    }

    pub(crate) fn push_views<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        out.push(view(
            format!("{prefix}.weight"),
            ParamKind::DenseWeight,
            &self.weight,
        ));
        out.push(ParamView {
            name: format!("{prefix}.bias"),
            kind: ParamKind::DenseBias,
            shape: self.bias.shape().to_vec(),
            data: self.bias.as_slice().unwrap(),
        });
    }

    pub(crate) fn push_views_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        let DenseParams { weight, bias } = self;
        out.push(view_mut(
            format!("{prefix}.weight"),
            ParamKind::DenseWeight,
            weight,
        ));
        out.push(ParamViewMut {
            name: format!("{prefix}.bias"),
            kind: ParamKind::DenseBias,
            shape: bias.shape().to_vec(),
            data: bias.as_slice_mut().unwrap(),
        });
    }
}

impl super::ParamSet for DenseParams {
    fn views(&self) -> Vec<ParamView<'_>> {
        let mut v = Vec::new();
        self.push_views("dense", &mut v);
        v
    }

    fn views_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let mut v = Vec::new();
        self.push_views_mut("dense", &mut v);
        v
    }
}

pub fn dense_forward(x: &Array2<f64>, p: &DenseParams) -> Result<Array2<f64>> {
    if x.ncols() != p.weight.ncols() {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            p.weight.ncols(),
            x.ncols()
        )));
    }
    Ok(x.dot(&p.weight.t()) + &p.bias)
}

/// Returns the input gradient and accumulates parameter gradients.
pub fn dense_backward(
    x: &Array2<f64>,
    d_out: &Array2<f64>,
    p: &DenseParams,
    grad: &mut DenseParams,
) -> Array2<f64> {
    grad.weight += &d_out.t().dot(x);
    grad.bias += &d_out.sum_axis(Axis(0));
    d_out.dot(&p.weight)
}

/// `y = x` for `x > 0`, `a * x` otherwise, with one slope per column.
pub fn prelu_forward(x: &Array2<f64>, slopes: &Array1<f64>) -> Result<Array2<f64>> {
    if x.ncols() != slopes.len() {
        return Err(Error::Shape(format!(
            "prelu has {} slopes, input has {} columns",
            slopes.len(),
            x.ncols()
        )));
    }
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        for (v, &a) in row.iter_mut().zip(slopes) {
            if *v <= 0.0 {
                *v *= a;
            }
        }
    }
    Ok(y)
}

/// Returns the input gradient and accumulates the slope gradient.
pub fn prelu_backward(
    x: &Array2<f64>,
    d_out: &Array2<f64>,
    slopes: &Array1<f64>,
    grad: &mut Array1<f64>,
) -> Array2<f64> {
    let mut dx = d_out.clone();
    for ((r, j), d) in dx.indexed_iter_mut() {
        let v = x[[r, j]];
        if v <= 0.0 {
            grad[j] += *d * v;
            *d *= slopes[j];
        }
    }
    dx
}

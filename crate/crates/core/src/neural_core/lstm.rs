use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::{sigmoid, ParamKind, ParamView, ParamViewMut};
use crate::rng::Rng;

/// One LSTM direction. Gate rows are stacked as `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `(4H, D)`
    pub w_input: Array2<f64>,
    /// `(4H, H)`
    pub w_hidden: Array2<f64>,
    /// `(4H)`
    pub bias: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input_dim, hidden);
        p.w_input.mapv_inplace(|_| rng.random_range(-bound..bound));
        p.w_hidden.mapv_inplace(|_| rng.random_range(-bound..bound));
        p.bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub(crate) fn push_views<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        out.push(view(
            format!("{prefix}.w_input"),
            ParamKind::LstmInputWeight,
            &self.w_input,
        ));
        out.push(view(
            format!("{prefix}.w_hidden"),
            ParamKind::LstmRecurrentWeight,
            &self.w_hidden,
        ));
        out.push(ParamView {
            name: format!("{prefix}.bias"),
            kind: ParamKind::LstmBias,
            shape: self.bias.shape().to_vec(),
            data: self.bias.as_slice().unwrap(),
        });
    }

    pub(crate) fn push_views_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        let LstmParams {
            w_input,
            w_hidden,
            bias,
        } = self;
        out.push(view_mut(
            format!("{prefix}.w_input"),
            ParamKind::LstmInputWeight,
            w_input,
        ));
        out.push(view_mut(
            format!("{prefix}.w_hidden"),
            ParamKind::LstmRecurrentWeight,
            w_hidden,
        ));
        out.push(ParamViewMut {
            name: format!("{prefix}.bias"),
            kind: ParamKind::LstmBias,
            shape: bias.shape().to_vec(),
            data: bias.as_slice_mut().unwrap(),
        });
    }
}

pub(crate) fn view(name: String, kind: ParamKind, a: &Array2<f64>) -> ParamView<'_> {
    ParamView {
        name,
        kind,
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("standard layout"),
    }
}

pub(crate) fn view_mut(name: String, kind: ParamKind, a: &mut Array2<f64>) -> ParamViewMut<'_> {
    ParamViewMut {
        name,
        kind,
        shape: a.shape().to_vec(),
        data: a.as_slice_mut().expect("standard layout"),
    }
}

/// Result of a single cell update.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

/// `c' = f*c + i*g`, `h' = o*tanh(c')` for a `(B, D)` input and `(B, H)` state.
pub fn lstm_step(
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    p: &LstmParams,
) -> LstmStep {
    let hs = p.hidden();
    let z = x.dot(&p.w_input.t()) + h_prev.dot(&p.w_hidden.t()) + &p.bias;
    let mut h = Array2::zeros(h_prev.raw_dim());
    let mut c = Array2::zeros(c_prev.raw_dim());
    for b in 0..z.nrows() {
        for k in 0..hs {
            let i = sigmoid(z[[b, k]]);
            let f = sigmoid(z[[b, hs + k]]);
            let g = z[[b, 2 * hs + k]].tanh();
            let o = sigmoid(z[[b, 3 * hs + k]]);
            c[[b, k]] = f * c_prev[[b, k]] + i * g;
            h[[b, k]] = o * c[[b, k]].tanh();
        }
    }
    LstmStep { h, c }
}

/// Cached activations of one direction over a whole batch.
#[derive(Debug, Clone)]
pub(crate) struct DirCache {
    /// Post-activation gates `(TB, 4H)`.
    gates: Array2<f64>,
    /// State entering each step `(TB, H)`.
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// `tanh(c')` per step `(TB, H)`.
    tanh_c: Array2<f64>,
    pub out: Array2<f64>,
}

/// Scan one direction over `(T*B, D)` input. Masked steps carry state
/// through unchanged and emit zeros.
pub(crate) fn scan_forward(
    p: &LstmParams,
    x: &Array2<f64>,
    mask: &[f64],
    steps: usize,
    batch: usize,
    reverse: bool,
) -> DirCache {
    let hs = p.hidden();
    let rows = steps * batch;
    // Input projection for every step at once.
    let mut gates = x.dot(&p.w_input.t());
    gates += &p.bias;
    let mut h_prev = Array2::zeros((rows, hs));
    let mut c_prev = Array2::zeros((rows, hs));
    let mut tanh_c = Array2::zeros((rows, hs));
    let mut out = Array2::zeros((rows, hs));
    let mut h = Array2::<f64>::zeros((batch, hs));
    let mut c = Array2::<f64>::zeros((batch, hs));
    let w_hidden_t = p.w_hidden.t();

    for step in 0..steps {
        let t = if reverse { steps - 1 - step } else { step };
        let r0 = t * batch;
        let rec = h.dot(&w_hidden_t);
        h_prev.slice_mut(s![r0..r0 + batch, ..]).assign(&h);
        c_prev.slice_mut(s![r0..r0 + batch, ..]).assign(&c);
        for b in 0..batch {
            let r = r0 + b;
            let m = mask[r];
            let g_row = gates.row_mut(r).into_slice().unwrap();
            let rec_row = rec.row(b);
            for k in 0..4 * hs {
                let z = g_row[k] + rec_row[k];
                g_row[k] = if (2 * hs..3 * hs).contains(&k) {
                    z.tanh()
                } else {
                    sigmoid(z)
                };
            }
            if m == 0.0 {
                continue;
            }
            for k in 0..hs {
                let (i, f, g, o) = (
                    g_row[k],
                    g_row[hs + k],
                    g_row[2 * hs + k],
                    g_row[3 * hs + k],
                );
                let cn = f * c[[b, k]] + i * g;
                let tc = cn.tanh();
                let hn = o * tc;
                c[[b, k]] = cn;
                h[[b, k]] = hn;
                tanh_c[[r, k]] = tc;
                out[[r, k]] = hn;
            }
        }
    }
    DirCache {
        gates,
        h_prev,
        c_prev,
        tanh_c,
        out,
    }
}

/// Backpropagate `d_out` through one direction. Accumulates parameter
/// gradients into `grad` and returns the gradient w.r.t. the input.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_backward(
    p: &LstmParams,
    x: &Array2<f64>,
    cache: &DirCache,
    d_out: &Array2<f64>,
    mask: &[f64],
    steps: usize,
    batch: usize,
    reverse: bool,
    grad: &mut LstmParams,
) -> Array2<f64> {
    let hs = p.hidden();
    let rows = steps * batch;
    let mut dz = Array2::<f64>::zeros((rows, 4 * hs));
    let mut dh = Array2::<f64>::zeros((batch, hs));
    let mut dc = Array2::<f64>::zeros((batch, hs));

    for step in (0..steps).rev() {
        let t = if reverse { steps - 1 - step } else { step };
        let r0 = t * batch;
        for b in 0..batch {
            let r = r0 + b;
            if mask[r] == 0.0 {
                // State passed through untouched; carries flow on unchanged.
                continue;
            }
            let g_row = cache.gates.row(r);
            let dz_row = dz.row_mut(r).into_slice().unwrap();
            for k in 0..hs {
                let (i, f, g, o) = (
                    g_row[k],
                    g_row[hs + k],
                    g_row[2 * hs + k],
                    g_row[3 * hs + k],
                );
                let tc = cache.tanh_c[[r, k]];
                let dh_new = d_out[[r, k]] + dh[[b, k]];
                let dc_new = dc[[b, k]] + dh_new * o * (1.0 - tc * tc);
                dz_row[k] = dc_new * g * i * (1.0 - i);
                dz_row[hs + k] = dc_new * cache.c_prev[[r, k]] * f * (1.0 - f);
                dz_row[2 * hs + k] = dc_new * i * (1.0 - g * g);
                dz_row[3 * hs + k] = dh_new * tc * o * (1.0 - o);
                dc[[b, k]] = dc_new * f;
            }
        }
        // Recurrent path: valid rows get dz W_h, masked rows keep their carry.
        let dz_t = dz.slice(s![r0..r0 + batch, ..]);
        let dh_rec = dz_t.dot(&p.w_hidden);
        for b in 0..batch {
            if mask[r0 + b] != 0.0 {
                dh.row_mut(b).assign(&dh_rec.row(b));
            }
        }
    }
    grad.w_input += &dz.t().dot(x);
    grad.w_hidden += &dz.t().dot(&cache.h_prev);
    grad.bias += &dz.sum_axis(Axis(0));
    dz.dot(&p.w_input)
}

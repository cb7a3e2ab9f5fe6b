use ndarray::{s, Array2};

use super::lstm::{scan_backward, scan_forward, DirCache, LstmParams};
use super::{ParamView, ParamViewMut};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BlstmParams {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        BlstmParams {
            forward: LstmParams::init(input_dim, hidden, rng),
            backward: LstmParams::init(input_dim, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub(crate) fn push_views<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        self.forward.push_views(&format!("{prefix}.fwd"), out);
        self.backward.push_views(&format!("{prefix}.bwd"), out);
    }

    pub(crate) fn push_views_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        self.forward.push_views_mut(&format!("{prefix}.fwd"), out);
        self.backward.push_views_mut(&format!("{prefix}.bwd"), out);
    }
}

#[derive(Debug, Clone)]
pub struct BlstmCache {
    fwd: DirCache,
    bwd: DirCache,
    /// `(TB, 2H)`: forward hidden state then backward hidden state.
    pub out: Array2<f64>,
}

/// Run both directions over each sample's valid steps and concatenate.
pub fn blstm_forward(
    p: &BlstmParams,
    x: &Array2<f64>,
    mask: &[f64],
    steps: usize,
    batch: usize,
) -> BlstmCache {
    let hs = p.hidden();
    let fwd = scan_forward(&p.forward, x, mask, steps, batch, false);
    let bwd = scan_forward(&p.backward, x, mask, steps, batch, true);
    let mut out = Array2::zeros((steps * batch, 2 * hs));
    out.slice_mut(s![.., ..hs]).assign(&fwd.out);
    out.slice_mut(s![.., hs..]).assign(&bwd.out);
    BlstmCache { fwd, bwd, out }
}

/// Returns the input gradient; parameter gradients accumulate into `grad`.
#[allow(clippy::too_many_arguments)]
pub fn blstm_backward(
    p: &BlstmParams,
    x: &Array2<f64>,
    cache: &BlstmCache,
    d_out: &Array2<f64>,
    mask: &[f64],
    steps: usize,
    batch: usize,
    grad: &mut BlstmParams,
) -> Array2<f64> {
    let hs = p.hidden();
    let d_fwd = d_out.slice(s![.., ..hs]).to_owned();
    let d_bwd = d_out.slice(s![.., hs..]).to_owned();
    let mut dx = scan_backward(
        &p.forward,
        x,
        &cache.fwd,
        &d_fwd,
        mask,
        steps,
        batch,
        false,
        &mut grad.forward,
    );
    dx += &scan_backward(
        &p.backward,
        x,
        &cache.bwd,
        &d_bwd,
        mask,
        steps,
        batch,
        true,
        &mut grad.backward,
    );
    dx
}

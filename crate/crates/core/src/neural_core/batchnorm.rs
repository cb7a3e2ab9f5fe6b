use ndarray::{Array1, Array2};

use super::{Mode, ParamKind, ParamView, ParamViewMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl BatchNormParams {
    pub fn new(features: usize) -> Self {
        BatchNormParams {
            gain: Array1::ones(features),
            bias: Array1::zeros(features),
        }
    }

    pub(crate) fn push_views<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        for (suffix, kind, a) in [
            ("gain", ParamKind::BnGain, &self.gain),
            ("bias", ParamKind::BnBias, &self.bias),
        ] {
            out.push(ParamView {
                name: format!("{prefix}.{suffix}"),
                kind,
                shape: a.shape().to_vec(),
                data: a.as_slice().unwrap(),
            });
        }
    }

    pub(crate) fn push_views_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        let BatchNormParams { gain, bias } = self;
        for (suffix, kind, a) in [
            ("gain", ParamKind::BnGain, gain),
            ("bias", ParamKind::BnBias, bias),
        ] {
            out.push(ParamViewMut {
                name: format!("{prefix}.{suffix}"),
                kind,
                shape: a.shape().to_vec(),
                data: a.as_slice_mut().unwrap(),
            });
        }
    }
}

/// Exponential moving averages used in infer mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        RunningStats {
            mean: Array1::zeros(features),
            var: Array1::ones(features),
        }
    }

    /// `running = momentum * running + (1 - momentum) * batch`
    pub fn update(&mut self, batch_mean: &Array1<f64>, batch_var: &Array1<f64>, momentum: f64) {
        self.mean.zip_mut_with(batch_mean, |r, &b| {
            *r = momentum * *r + (1.0 - momentum) * b
        });
        self.var
            .zip_mut_with(batch_var, |r, &b| *r = momentum * *r + (1.0 - momentum) * b);
    }
}

#[derive(Debug, Clone)]
pub struct BnCache {
    mode: Mode,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    valid: usize,
    /// Statistics of the valid rows (train mode only).
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
    pub out: Array2<f64>,
}

impl BnCache {
    /// Normalized input before gain and bias.
    pub fn normalized(&self) -> &Array2<f64> {
        &self.xhat
    }
}

/// Per-feature normalization over the valid rows of `x`.
///
/// Train mode uses the biased mean/variance of valid rows; infer mode uses
/// `running`. Masked rows stay zero.
pub fn batchnorm_forward(
    x: &Array2<f64>,
    mask: &[f64],
    p: &BatchNormParams,
    running: &RunningStats,
    epsilon: f64,
    mode: Mode,
) -> Result<BnCache> {
    let (rows, feats) = x.dim();
    let valid = mask.iter().filter(|&&m| m != 0.0).count();
    let (mean, var) = match mode {
        Mode::Train => {
            if valid == 0 {
                return Err(Error::DegenerateBatch);
            }
            let mut mean = Array1::<f64>::zeros(feats);
            for r in (0..rows).filter(|&r| mask[r] != 0.0) {
                mean += &x.row(r);
            }
            mean /= valid as f64;
            let mut var = Array1::<f64>::zeros(feats);
            for r in (0..rows).filter(|&r| mask[r] != 0.0) {
                for j in 0..feats {
                    let d = x[[r, j]] - mean[j];
                    var[j] += d * d;
                }
            }
            var /= valid as f64;
            (mean, var)
        }
        Mode::Infer => (running.mean.clone(), running.var.clone()),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + epsilon).sqrt());
    let mut xhat = Array2::zeros((rows, feats));
    let mut out = Array2::zeros((rows, feats));
    for r in (0..rows).filter(|&r| mask[r] != 0.0) {
        for j in 0..feats {
            let n = (x[[r, j]] - mean[j]) * inv_std[j];
            xhat[[r, j]] = n;
            out[[r, j]] = p.gain[j] * n + p.bias[j];
        }
    }
    Ok(BnCache {
        mode,
        xhat,
        inv_std,
        valid,
        batch_mean: mean,
        batch_var: var,
        out,
    })
}

/// Returns the input gradient and accumulates gain/bias gradients.
pub fn batchnorm_backward(
    cache: &BnCache,
    d_out: &Array2<f64>,
    mask: &[f64],
    p: &BatchNormParams,
    grad: &mut BatchNormParams,
) -> Array2<f64> {
    let (rows, feats) = d_out.dim();
    let mut sum_dxhat = Array1::<f64>::zeros(feats);
    let mut sum_dxhat_xhat = Array1::<f64>::zeros(feats);
    for r in (0..rows).filter(|&r| mask[r] != 0.0) {
        for j in 0..feats {
            let dy = d_out[[r, j]];
            let xh = cache.xhat[[r, j]];
            grad.gain[j] += dy * xh;
            grad.bias[j] += dy;
            let dxh = dy * p.gain[j];
            sum_dxhat[j] += dxh;
            sum_dxhat_xhat[j] += dxh * xh;
        }
    }
    let mut dx = Array2::zeros((rows, feats));
    let n = cache.valid as f64;
    for r in (0..rows).filter(|&r| mask[r] != 0.0) {
        for j in 0..feats {
            let dxh = d_out[[r, j]] * p.gain[j];
            dx[[r, j]] = match cache.mode {
                Mode::Train => {
                    cache.inv_std[j] / n
                        * (n * dxh - sum_dxhat[j] - cache.xhat[[r, j]] * sum_dxhat_xhat[j])
                }
                Mode::Infer => dxh * cache.inv_std[j],
            };
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    #[test]
    fn train_mode_standardizes_valid_rows() {
        let mut rng = rng_from_seed(2);
        let x = Array2::from_shape_fn((40, 5), |(_, j)| {
            3.0 * j as f64 + 5.0 * rng.random_range(-1.7..1.7)
        });
        let mut mask = vec![1.0; 40];
        for m in mask.iter_mut().skip(30) {
            *m = 0.0;
        }
        let p = BatchNormParams::new(5);
        let c = batchnorm_forward(&x, &mask, &p, &RunningStats::new(5), 1e-5, Mode::Train).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = (0..30).map(|r| c.normalized()[[r, j]]).collect();
            let mean = col.iter().sum::<f64>() / 30.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-6, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "var {var}");
            assert!((30..40).all(|r| c.out[[r, j]] == 0.0));
        }
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let x = Array2::from_elem((6, 2), 4.0);
        let p = BatchNormParams::new(2);
        let c =
            batchnorm_forward(&x, &[1.0; 6], &p, &RunningStats::new(2), 1e-5, Mode::Train).unwrap();
        assert!(c.out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_valid_rows_is_degenerate() {
        let x = Array2::zeros((3, 2));
        let p = BatchNormParams::new(2);
        let r = batchnorm_forward(&x, &[0.0; 3], &p, &RunningStats::new(2), 1e-5, Mode::Train);
        assert!(matches!(r, Err(Error::DegenerateBatch)));
    }

    #[test]
    fn running_stats_follow_exponential_average() {
        let p = BatchNormParams::new(1);
        let mut running = RunningStats::new(1);
        let batches = [vec![1.0, 3.0], vec![10.0, 14.0, 18.0]];
        // Hand-rolled: mean/var of each batch, then r <- 0.9 r + 0.1 b.
        let (mut m, mut v) = (0.0, 1.0);
        for b in &batches {
            let n = b.len() as f64;
            let bm = b.iter().sum::<f64>() / n;
            let bv = b.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / n;
            m = 0.9 * m + 0.1 * bm;
            v = 0.9 * v + 0.1 * bv;

            let x = Array2::from_shape_vec((b.len(), 1), b.clone()).unwrap();
            let c = batchnorm_forward(&x, &vec![1.0; b.len()], &p, &running, 1e-5, Mode::Train)
                .unwrap();
            running.update(&c.batch_mean, &c.batch_var, 0.9);
        }
        assert!((running.mean[0] - m).abs() < 1e-12);
        assert!((running.var[0] - v).abs() < 1e-12);
        assert!((m - 1.58).abs() < 1e-12);
    }
}

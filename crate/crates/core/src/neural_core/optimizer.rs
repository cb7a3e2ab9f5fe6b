use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    /// Decay of the squared-gradient average.
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 5e-5,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: it freezes the parameters.
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Parameter(format!(
                "lr must be >= 0, got {}",
                self.lr
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Parameter(format!(
                "rho must be in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Squared-gradient accumulators, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<P> {
    pub acc: P,
    pub steps: u64,
}

impl<P: ParamSet + Clone> OptimizerState<P> {
    pub fn new(params: &P) -> Self {
        OptimizerState {
            acc: params.zeros_like(),
            steps: 0,
        }
    }
}

/// `acc <- rho * acc + (1 - rho) * g^2`, then `p <- p - lr * g / (sqrt(acc) + eps)`.
pub fn rmsprop_step<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut OptimizerState<P>,
    cfg: &OptimizerConfig,
) {
    let grads = grads.views();
    for ((p, g), a) in params
        .views_mut()
        .into_iter()
        .zip(&grads)
        .zip(state.acc.views_mut())
    {
        for ((pv, &gv), av) in p.data.iter_mut().zip(g.data).zip(a.data.iter_mut()) {
            *av = cfg.rho * *av + (1.0 - cfg.rho) * gv * gv;
            *pv -= cfg.lr * gv / (av.sqrt() + cfg.epsilon);
        }
    }
    state.steps += 1;
}

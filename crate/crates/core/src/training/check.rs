use crate::error::Result;
use crate::neural_core::gradcheck::{check_gradients, GradCheckReport};
use crate::neural_core::{Mode, Model, Params};
use crate::sequence_ops::Batch;

use super::gi::gi_selection;

/// Settings for [`gradcheck_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub mode: Mode,
    pub dropout_seed: u64,
    /// Central-difference step.
    pub epsilon: f64,
    /// Entries sampled per tensor; `None` checks every entry.
    pub max_per_tensor: Option<usize>,
    /// Seed for entry sampling.
    pub seed: u64,
    /// Scale the analytic output-weight gradient by 1.5 before comparing,
    /// as a negative control for the checker itself.
    pub corrupt: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            mode: Mode::Infer,
            dropout_seed: 0,
            epsilon: 1e-5,
            max_per_tensor: None,
            seed: 0,
            corrupt: false,
        }
    }
}

/// Finite-difference check of the full training loss (GI cross-entropy plus
/// L2) of `model` on `batch`.
pub fn gradcheck_model(
    model: &Model,
    batch: &Batch,
    opts: &GradcheckOptions,
) -> Result<GradCheckReport> {
    let GradcheckOptions {
        mode,
        dropout_seed,
        epsilon,
        max_per_tensor,
        seed,
        corrupt,
    } = *opts;
    let sel = gi_selection(batch, model.config.gi_k);
    let (_, mut grads, _, _) = model.loss_and_grads(batch, &sel, mode, dropout_seed)?;
    if corrupt {
        grads.output.weight *= 1.5;
    }
    let mut probe = model.clone();
    let loss = |p: &Params| {
        probe.params.clone_from(p);
        probe
            .loss(batch, &sel, mode, dropout_seed)
            .map(|l| l.total())
            .unwrap_or(f64::NAN)
    };
    Ok(check_gradients(
        &model.params,
        &grads,
        loss,
        epsilon,
        max_per_tensor,
        seed,
    ))
}

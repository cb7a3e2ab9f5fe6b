use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::gi::{argmax, ensemble_probabilities, gi_selection, split_by_sample};
use super::metrics::{evaluate, predict_dataset, Metrics};
use super::split::{check_disjoint, EvalSplit};
use crate::error::{Error, Result};
use crate::neural_core::{rmsprop_step, InputNorm, Mode, Model, OptimizerConfig, OptimizerState};
use crate::pose_ingest::POSE_DIM;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sequence_ops::{
    augment_dataset, dfd_dataset, AugmentSpec, Batch, Dataset, DfdConfig, DfdStats,
};

pub const REPORT_VERSION: u32 = 1;

const STREAM_AUGMENT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_BOOTSTRAP: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a new best validation top-1.
    pub patience: Option<usize>,
    pub apply_dfd: bool,
    pub dfd: DfdConfig,
    pub augment: AugmentSpec,
    pub optimizer: OptimizerConfig,
    pub split: EvalSplit,
    pub bootstrap_trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            seed: 0,
            patience: Some(20),
            apply_dfd: true,
            dfd: DfdConfig::default(),
            augment: AugmentSpec::default(),
            optimizer: OptimizerConfig::default(),
            split: EvalSplit::default(),
            bootstrap_trials: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be >= 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Parameter("patience must be >= 1".into()));
        }
        if self.bootstrap_trials == 0 {
            return Err(Error::Parameter("bootstrap_trials must be >= 1".into()));
        }
        self.dfd.validate()?;
        self.augment.validate()?;
        self.optimizer.validate()?;
        self.split.validate()
    }

    /// Frame dropout, when enabled. Applied to every split before use.
    pub fn preprocess(&self, data: &Dataset) -> (Dataset, Vec<DfdStats>) {
        if self.apply_dfd {
            dfd_dataset(data, &self.dfd)
        } else {
            (data.clone(), Vec::new())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean of the batch cross-entropies.
    pub ce_loss: f64,
    /// Mean of the batch L2 penalties.
    pub l2_loss: f64,
    /// Top-1 of the train-mode forward passes.
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub model: crate::neural_core::ModelConfig,
    pub n_train_original: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub train_frames_before_dfd: usize,
    pub train_frames_after_dfd: usize,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    /// Validation metrics of the returned model.
    pub final_metrics: Option<Metrics>,
}

impl TrainReport {
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,ce_loss,l2_loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_acc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.ce_loss, e.l2_loss, e.train_acc, val
            ));
        }
        out
    }
}

/// Training result. Timings are kept apart from the report so that the
/// report is a pure function of its inputs.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub epoch_seconds: Vec<f64>,
    pub optimizer_state: OptimizerState<crate::neural_core::Params>,
    /// Frame dropout statistics for the training clips.
    pub dfd_stats: Vec<DfdStats>,
}

/// Train `model` in place.
///
/// Frame dropout runs once on both sets, then the training set is augmented
/// and the input standardization is fitted to it. With a non-empty `val`
/// set the model with the best validation top-1 is restored at the end.
pub fn train(
    model: &mut Model,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    train.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    for d in [train, val] {
        if d.n_classes() != model.config.n_classes {
            return Err(Error::Parameter(format!(
                "dataset has {} classes, model has {}",
                d.n_classes(),
                model.config.n_classes
            )));
        }
    }
    if model.config.input_dim != POSE_DIM {
        return Err(Error::Parameter(format!(
            "model input_dim must be {POSE_DIM}"
        )));
    }
    check_disjoint(train, val)?;

    let (train_dfd, dfd_stats) = cfg.preprocess(train);
    let (val, _) = cfg.preprocess(val);
    let train_set = augment_dataset(
        &train_dfd,
        &cfg.augment,
        derive_seed(cfg.seed, &[STREAM_AUGMENT]),
    )?;
    model.input_norm = InputNorm::fit(
        POSE_DIM,
        train_set
            .sequences
            .iter()
            .flat_map(|s| s.frames.iter().map(|f| (&f.values[..], &f.mask[..]))),
    );

    let mut state = OptimizerState::new(&model.params);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model, OptimizerState<_>)> = None;
    let mut stopped_early = false;
    let k = model.config.gi_k;
    let n = train_set.len();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(
            cfg.seed,
            &[STREAM_SHUFFLE, epoch as u64],
        )));
        let (mut ce_sum, mut l2_sum, mut correct) = (0.0, 0.0, 0usize);
        let n_batches = order.len().div_ceil(cfg.batch_size);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let fault = |e: Error| match e {
                Error::NumericalFault(m) => {
                    Error::NumericalFault(format!("epoch {epoch}, batch {b}: {m}"))
                }
                other => other,
            };
            let seqs: Vec<_> = chunk.iter().map(|&i| &train_set.sequences[i]).collect();
            let batch = Batch::from_sequences(&seqs)?;
            let sel = gi_selection(&batch, k);
            let seed = derive_seed(cfg.seed, &[STREAM_DROPOUT, epoch as u64, b as u64]);
            let (loss, grads, _, fwd) = model
                .loss_and_grads(&batch, &sel, Mode::Train, seed)
                .map_err(fault)?;

            let logits = model
                .head_forward(&Model::gather_rows(&fwd, fwd.top(), &sel.rows))
                .map_err(fault)?
                .logits;
            for (steps, &y) in split_by_sample(&logits, &sel, batch.size())
                .iter()
                .zip(&batch.labels)
            {
                correct += usize::from(argmax(&ensemble_probabilities(steps)) == y);
            }
            ce_sum += loss.ce * batch.size() as f64;
            l2_sum += loss.l2;

            model.update_running_stats(&fwd);
            rmsprop_step(&mut model.params, &grads, &mut state, &cfg.optimizer);
        }

        let val_acc = if val.is_empty() {
            None
        } else {
            let probs = predict_dataset(model, &val, cfg.batch_size)?;
            let hits = probs
                .iter()
                .zip(&val.sequences)
                .filter(|(p, s)| argmax(p) == s.label)
                .count();
            Some(hits as f64 / val.len() as f64)
        };
        epochs.push(EpochStats {
            epoch,
            ce_loss: ce_sum / n as f64,
            l2_loss: l2_sum / n_batches as f64,
            train_acc: correct as f64 / n as f64,
            val_acc,
        });
        epoch_seconds.push(started.elapsed().as_secs_f64());

        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, ..)| acc > *b) {
                best = Some((acc, epoch, model.clone(), state.clone()));
            } else if cfg
                .patience
                .is_some_and(|p| epoch - best.as_ref().unwrap().1 >= p)
            {
                stopped_early = true;
                break;
            }
        }
    }

    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, m, s)) = best {
        *model = m;
        state = s;
    }
    let final_metrics = if val.is_empty() {
        None
    } else {
        Some(evaluate(
            model,
            &val,
            cfg.bootstrap_trials,
            derive_seed(cfg.seed, &[STREAM_BOOTSTRAP]),
        )?)
    };
    Ok(TrainOutcome {
        report: TrainReport {
            version: REPORT_VERSION,
            seed: cfg.seed,
            config: cfg.clone(),
            model: model.config,
            n_train_original: train.len(),
            n_train: n,
            n_val: val.len(),
            train_frames_before_dfd: train.total_frames(),
            train_frames_after_dfd: train_dfd.total_frames(),
            epochs,
            best_epoch,
            stopped_early,
            final_metrics,
        },
        epoch_seconds,
        optimizer_state: state,
        dfd_stats,
    })
}

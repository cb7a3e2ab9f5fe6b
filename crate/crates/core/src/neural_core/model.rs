use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::batchnorm::{
    batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, RunningStats,
};
use super::blstm::{blstm_backward, blstm_forward, BlstmCache, BlstmParams};
use super::dense::{dense_backward, dense_forward, prelu_backward, prelu_forward, DenseParams};
use super::dropout::dropout_forward;
use super::loss::row_cross_entropy;
use super::{check_finite, softmax, Mode, ParamKind, ParamSet, ParamView, ParamViewMut};
use crate::error::{Error, Result};
use crate::pose_ingest::POSE_DIM;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sequence_ops::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub blstm_layers: usize,
    /// Hidden units per direction.
    pub hidden_size: usize,
    /// Width of the first dense layer.
    pub dense_hidden: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub l2_coeff: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    /// Number of final valid steps fed to the classification head.
    pub gi_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: POSE_DIM,
            blstm_layers: 5,
            hidden_size: 128,
            dense_hidden: 64,
            n_classes: 2,
            dropout_rate: 0.3,
            l2_coeff: 1e-4,
            bn_momentum: 0.99,
            bn_epsilon: 1e-5,
            gi_k: 5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let p = |m: String| Err(Error::Parameter(m));
        if self.blstm_layers == 0 {
            return p("blstm_layers must be >= 1".into());
        }
        if self.input_dim == 0 || self.hidden_size == 0 || self.dense_hidden == 0 {
            return p("layer sizes must be positive".into());
        }
        if self.n_classes < 2 {
            return p(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.gi_k == 0 {
            return p("gi_k must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return p(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if !(self.l2_coeff >= 0.0) {
            return p(format!("l2_coeff must be >= 0, got {}", self.l2_coeff));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return p(format!(
                "bn_momentum must be in [0, 1), got {}",
                self.bn_momentum
            ));
        }
        if !(self.bn_epsilon > 0.0) {
            return p(format!("bn_epsilon must be > 0, got {}", self.bn_epsilon));
        }
        Ok(())
    }
}

/// One recurrent block: BLSTM followed by batch normalization (and dropout,
/// which has no parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub blstm: BlstmParams,
    pub bn: BatchNormParams,
}

/// Every learnable tensor of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub blocks: Vec<Block>,
    pub hidden: DenseParams,
    pub prelu: Array1<f64>,
    pub output: DenseParams,
}

impl ParamSet for Params {
    fn views(&self) -> Vec<ParamView<'_>> {
        let mut v = Vec::new();
        for (l, b) in self.blocks.iter().enumerate() {
            b.blstm.push_views(&format!("blstm{l}"), &mut v);
            b.bn.push_views(&format!("bn{l}"), &mut v);
        }
        self.hidden.push_views("dense_hidden", &mut v);
        v.push(ParamView {
            name: "prelu.slope".into(),
            kind: ParamKind::PreluSlope,
            shape: self.prelu.shape().to_vec(),
            data: self.prelu.as_slice().unwrap(),
        });
        self.output.push_views("dense_out", &mut v);
        v
    }

    fn views_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let mut v = Vec::new();
        let Params {
            blocks,
            hidden,
            prelu,
            output,
        } = self;
        for (l, b) in blocks.iter_mut().enumerate() {
            b.blstm.push_views_mut(&format!("blstm{l}"), &mut v);
            b.bn.push_views_mut(&format!("bn{l}"), &mut v);
        }
        hidden.push_views_mut("dense_hidden", &mut v);
        v.push(ParamViewMut {
            name: "prelu.slope".into(),
            kind: ParamKind::PreluSlope,
            shape: prelu.shape().to_vec(),
            data: prelu.as_slice_mut().unwrap(),
        });
        output.push_views_mut("dense_out", &mut v);
        v
    }
}

/// Fixed per-coordinate standardization applied to valid input entries.
/// Suppressed entries stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        InputNorm {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    /// Mean and standard deviation of each coordinate over its valid entries.
    /// Coordinates with no valid entries (or no spread) keep mean 0 / std 1.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = (&'a [f64], &'a [bool])>) -> Self {
        let mut n = vec![0usize; dim];
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for (values, mask) in rows {
            for j in 0..dim {
                if mask[j] {
                    n[j] += 1;
                    sum[j] += values[j];
                    sq[j] += values[j] * values[j];
                }
            }
        }
        let mut norm = InputNorm::identity(dim);
        for j in 0..dim {
            if n[j] == 0 {
                continue;
            }
            let mean = sum[j] / n[j] as f64;
            let var = (sq[j] / n[j] as f64 - mean * mean).max(0.0);
            norm.mean[j] = mean;
            if var > 1e-12 {
                norm.std[j] = var.sqrt();
            }
        }
        norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
    /// One per block.
    pub running: Vec<RunningStats>,
    pub input_norm: InputNorm,
}

/// Activations of the recurrent stack for one batch.
#[derive(Debug, Clone)]
pub struct StackForward {
    pub steps: usize,
    pub batch: usize,
    /// 1.0 for real steps, 0.0 for padding; length `steps * batch`.
    pub mask: Vec<f64>,
    input: Array2<f64>,
    blocks: Vec<BlockForward>,
}

#[derive(Debug, Clone)]
struct BlockForward {
    blstm: BlstmCache,
    bn: BnCache,
    dropout: Option<Array2<f64>>,
    out: Array2<f64>,
}

impl StackForward {
    /// Output of the top block, `(T * B, 2H)`.
    pub fn top(&self) -> &Array2<f64> {
        &self.blocks.last().expect("at least one block").out
    }

    /// Raw output of the top BLSTM layer (before its normalization).
    pub fn top_blstm(&self) -> &Array2<f64> {
        &self.blocks.last().expect("at least one block").blstm.out
    }

    pub fn row(&self, sample: usize, step: usize) -> usize {
        step * self.batch + sample
    }
}

/// Which `(sample, step)` rows of the top output feed the head, and the
/// weight of each row's cross-entropy in the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSelection {
    pub rows: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    input: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
    pub logits: Array2<f64>,
}

/// Cross-entropy and L2 components of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub ce: f64,
    pub l2: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.ce + self.l2
    }
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        let hs = config.hidden_size;
        let blocks = (0..config.blstm_layers)
            .map(|l| {
                let input = if l == 0 { config.input_dim } else { 2 * hs };
                Block {
                    blstm: BlstmParams::init(input, hs, &mut rng),
                    bn: BatchNormParams::new(2 * hs),
                }
            })
            .collect();
        let params = Params {
            blocks,
            hidden: DenseParams::init(2 * hs, config.dense_hidden, &mut rng),
            prelu: Array1::from_elem(config.dense_hidden, 0.25),
            output: DenseParams::init(config.dense_hidden, config.n_classes, &mut rng),
        };
        Ok(Model {
            running: (0..config.blstm_layers)
                .map(|_| RunningStats::new(2 * hs))
                .collect(),
            input_norm: InputNorm::identity(config.input_dim),
            config,
            params,
        })
    }

    /// Time-major, standardized network input and step mask for a batch.
    fn prepare_input(&self, batch: &Batch) -> Result<(Array2<f64>, Vec<f64>)> {
        let (b, steps, d) = batch.values.dim();
        if d != self.config.input_dim {
            return Err(Error::Shape(format!(
                "model expects {} input features, batch has {d}",
                self.config.input_dim
            )));
        }
        let mut x = Array2::zeros((steps * b, d));
        let mut mask = vec![0.0; steps * b];
        for s in 0..b {
            for t in 0..steps {
                if !batch.time_mask[[s, t]] {
                    continue;
                }
                let r = t * b + s;
                mask[r] = 1.0;
                for j in 0..d {
                    if batch.entry_mask[[s, t, j]] {
                        x[[r, j]] = (batch.values[[s, t, j]] - self.input_norm.mean[j])
                            / self.input_norm.std[j];
                    }
                }
            }
        }
        Ok((x, mask))
    }

    /// Run the recurrent stack. Dropout (train mode only) draws its masks
    /// from `dropout_seed`.
    pub fn forward_stack(
        &self,
        batch: &Batch,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<StackForward> {
        let (input, mask) = self.prepare_input(batch)?;
        let (n, steps) = (batch.size(), batch.max_len());
        let mut blocks: Vec<BlockForward> = Vec::with_capacity(self.params.blocks.len());
        for (l, (block, running)) in self.params.blocks.iter().zip(&self.running).enumerate() {
            let x = blocks.last().map_or(&input, |b| &b.out);
            let blstm = blstm_forward(&block.blstm, x, &mask, steps, n);
            check_finite(&format!("blstm{l} forward"), &blstm.out)?;
            let bn = batchnorm_forward(
                &blstm.out,
                &mask,
                &block.bn,
                running,
                self.config.bn_epsilon,
                mode,
            )?;
            let (out, dropout) = dropout_forward(
                &bn.out,
                self.config.dropout_rate,
                mode,
                derive_seed(dropout_seed, &[l as u64]),
            );
            check_finite(&format!("block{l} output"), &out)?;
            blocks.push(BlockForward {
                blstm,
                bn,
                dropout,
                out,
            });
        }
        Ok(StackForward {
            steps,
            batch: n,
            mask,
            input,
            blocks,
        })
    }

    /// Apply the dense → PReLU → dense head to `(rows, 2H)` features.
    pub fn head_forward(&self, x: &Array2<f64>) -> Result<HeadCache> {
        let pre_act = dense_forward(x, &self.params.hidden)?;
        let act = prelu_forward(&pre_act, &self.params.prelu)?;
        let logits = dense_forward(&act, &self.params.output)?;
        check_finite("head logits", &logits)?;
        Ok(HeadCache {
            input: x.clone(),
            pre_act,
            act,
            logits,
        })
    }

    /// Returns the gradient w.r.t. the head input.
    pub fn head_backward(
        &self,
        cache: &HeadCache,
        d_logits: &Array2<f64>,
        grad: &mut Params,
    ) -> Array2<f64> {
        let d_act = dense_backward(&cache.act, d_logits, &self.params.output, &mut grad.output);
        let d_pre = prelu_backward(&cache.pre_act, &d_act, &self.params.prelu, &mut grad.prelu);
        dense_backward(&cache.input, &d_pre, &self.params.hidden, &mut grad.hidden)
    }

    /// Backpropagate a gradient w.r.t. the top block output through the stack.
    pub fn stack_backward(
        &self,
        fwd: &StackForward,
        d_top: Array2<f64>,
        grad: &mut Params,
    ) -> Result<()> {
        let mut d = d_top;
        for l in (0..fwd.blocks.len()).rev() {
            let bf = &fwd.blocks[l];
            let block = &self.params.blocks[l];
            let gblock = &mut grad.blocks[l];
            if let Some(f) = &bf.dropout {
                d *= f;
            }
            let d_blstm = batchnorm_backward(&bf.bn, &d, &fwd.mask, &block.bn, &mut gblock.bn);
            let x = if l == 0 {
                &fwd.input
            } else {
                &fwd.blocks[l - 1].out
            };
            d = blstm_backward(
                &block.blstm,
                x,
                &bf.blstm,
                &d_blstm,
                &fwd.mask,
                fwd.steps,
                fwd.batch,
                &mut gblock.blstm,
            );
            check_finite(&format!("blstm{l} backward"), &d)?;
        }
        Ok(())
    }

    pub fn gather_rows(
        fwd: &StackForward,
        source: &Array2<f64>,
        rows: &[(usize, usize)],
    ) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), source.ncols()));
        for (i, &(s, t)) in rows.iter().enumerate() {
            out.row_mut(i).assign(&source.row(fwd.row(s, t)));
        }
        out
    }

    /// `l2_coeff * sum ||W||^2` over weight matrices (not biases, gains or slopes).
    pub fn l2_penalty(&self) -> f64 {
        let sum: f64 = self
            .params
            .views()
            .iter()
            .filter(|v| v.kind.is_weight())
            .map(|v| v.data.iter().map(|w| w * w).sum::<f64>())
            .sum();
        self.config.l2_coeff * sum
    }

    fn add_l2_grad(&self, grad: &mut Params) {
        let coeff = 2.0 * self.config.l2_coeff;
        for (p, g) in self.params.views().iter().zip(grad.views_mut()) {
            if p.kind.is_weight() {
                for (gv, pv) in g.data.iter_mut().zip(p.data) {
                    *gv += coeff * pv;
                }
            }
        }
    }

    fn weighted_ce(logits: &Array2<f64>, sel: &HeadSelection, labels: &[usize]) -> Result<f64> {
        let classes = logits.ncols();
        let mut ce = 0.0;
        for (r, (&(s, _), &w)) in sel.rows.iter().zip(&sel.weights).enumerate() {
            let label = labels[s];
            if label >= classes {
                return Err(Error::Label { label, classes });
            }
            ce += w * row_cross_entropy(logits.row(r), label);
        }
        Ok(ce)
    }

    /// Loss without gradients.
    pub fn loss(
        &self,
        batch: &Batch,
        sel: &HeadSelection,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<LossParts> {
        let fwd = self.forward_stack(batch, mode, dropout_seed)?;
        let head = self.head_forward(&Self::gather_rows(&fwd, fwd.top(), &sel.rows))?;
        Ok(LossParts {
            ce: Self::weighted_ce(&head.logits, sel, &batch.labels)?,
            l2: self.l2_penalty(),
        })
    }

    /// Loss and the gradient of `ce + l2` for every parameter.
    ///
    /// The cross-entropy is `sum_r weight_r * CE(logits_r, label)` over the
    /// selected rows. Also returns the gradient w.r.t. the top block output
    /// and the forward activations.
    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        sel: &HeadSelection,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<(LossParts, Params, Array2<f64>, StackForward)> {
        if sel.rows.len() != sel.weights.len() {
            return Err(Error::Shape(
                "selection rows and weights differ in length".into(),
            ));
        }
        let fwd = self.forward_stack(batch, mode, dropout_seed)?;
        let head = self.head_forward(&Self::gather_rows(&fwd, fwd.top(), &sel.rows))?;
        let ce = Self::weighted_ce(&head.logits, sel, &batch.labels)?;

        let mut d_logits = Array2::zeros(head.logits.raw_dim());
        for (r, (&(s, _), &w)) in sel.rows.iter().zip(&sel.weights).enumerate() {
            let p = softmax(head.logits.row(r));
            let mut row = d_logits.row_mut(r);
            row.assign(&(p * w));
            row[batch.labels[s]] -= w;
        }
        let mut grad = self.params.zeros_like();
        let d_rows = self.head_backward(&head, &d_logits, &mut grad);
        let mut d_top = Array2::zeros(fwd.top().raw_dim());
        for (i, &(s, t)) in sel.rows.iter().enumerate() {
            let mut row = d_top.row_mut(fwd.row(s, t));
            row += &d_rows.row(i);
        }
        self.stack_backward(&fwd, d_top.clone(), &mut grad)?;
        self.add_l2_grad(&mut grad);
        for v in grad.views() {
            if v.data.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericalFault(format!("gradient of {}", v.name)));
            }
        }
        Ok((
            LossParts {
                ce,
                l2: self.l2_penalty(),
            },
            grad,
            d_top,
            fwd,
        ))
    }

    /// Fold a train-mode forward pass's batch statistics into the running averages.
    pub fn update_running_stats(&mut self, fwd: &StackForward) {
        let momentum = self.config.bn_momentum;
        for (running, b) in self.running.iter_mut().zip(&fwd.blocks) {
            running.update(&b.bn.batch_mean, &b.bn.batch_var, momentum);
        }
    }
}

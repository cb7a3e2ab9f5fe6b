//! Many-to-many head over the last `k` valid timesteps of each sample.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::neural_core::{
    row_cross_entropy, softmax, softmax_cross_entropy, HeadSelection, Mode, Model,
};
use crate::pose_ingest::PoseSequence;
use crate::sequence_ops::Batch;

/// Number of head outputs for a sample of `length` valid steps.
pub fn effective_k(k: usize, length: usize) -> usize {
    k.min(length)
}

/// Rows `lengths[b] - k_b .. lengths[b]` of every sample, each weighted
/// `1 / (B * k_b)` so the weighted sum is a mean of per-sample means.
pub fn gi_selection(batch: &Batch, k: usize) -> HeadSelection {
    let n = batch.size() as f64;
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (b, &len) in batch.lengths.iter().enumerate() {
        let kb = effective_k(k, len);
        for t in len - kb..len {
            rows.push((b, t));
            weights.push(1.0 / (n * kb as f64));
        }
    }
    HeadSelection { rows, weights }
}

/// Per-sample head logits, `(k_b, C)` each, for the last `k_b` valid steps.
pub fn forward_gi(
    model: &Model,
    batch: &Batch,
    mode: Mode,
    dropout_seed: u64,
) -> Result<Vec<Array2<f64>>> {
    let sel = gi_selection(batch, model.config.gi_k);
    let fwd = model.forward_stack(batch, mode, dropout_seed)?;
    let head = model.head_forward(&Model::gather_rows(&fwd, fwd.top(), &sel.rows))?;
    Ok(split_by_sample(&head.logits, &sel, batch.size()))
}

pub(crate) fn split_by_sample(
    logits: &Array2<f64>,
    sel: &HeadSelection,
    samples: usize,
) -> Vec<Array2<f64>> {
    let mut per: Vec<Vec<usize>> = vec![Vec::new(); samples];
    for (r, &(b, _)) in sel.rows.iter().enumerate() {
        per[b].push(r);
    }
    per.iter()
        .map(|rows| logits.select(ndarray::Axis(0), rows))
        .collect()
}

/// Mean over samples of the mean cross-entropy over each sample's steps.
pub fn gi_loss(step_logits: &[Array2<f64>], labels: &[usize]) -> Result<f64> {
    if step_logits.is_empty() || step_logits.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit blocks for {} labels",
            step_logits.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (logits, &label) in step_logits.iter().zip(labels) {
        let classes = logits.ncols();
        if label >= classes {
            return Err(Error::Label { label, classes });
        }
        if logits.nrows() == 0 {
            return Err(Error::Empty("sample with no head outputs".into()));
        }
        let ce: f64 = logits
            .rows()
            .into_iter()
            .map(|r| row_cross_entropy(r, label))
            .sum();
        total += ce / logits.nrows() as f64;
    }
    Ok(total / labels.len() as f64)
}

/// Mean of the per-step softmax distributions.
pub fn ensemble_probabilities(step_logits: &Array2<f64>) -> Array1<f64> {
    let mut mean = Array1::zeros(step_logits.ncols());
    for row in step_logits.rows() {
        mean += &softmax(row);
    }
    mean / step_logits.nrows() as f64
}

/// Ensemble class probabilities for each sample of a batch, in infer mode.
pub fn predict_batch(model: &Model, batch: &Batch) -> Result<Vec<Array1<f64>>> {
    Ok(forward_gi(model, batch, Mode::Infer, 0)?
        .iter()
        .map(ensemble_probabilities)
        .collect())
}

pub fn predict(model: &Model, seq: &PoseSequence) -> Result<Array1<f64>> {
    let mut probs = predict_batch(model, &Batch::single(seq)?)?;
    Ok(probs.remove(0))
}

/// Index of the largest value; ties go to the lower index.
pub fn argmax(values: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Logits at each sample's final valid step, `(B, C)`.
pub fn many_to_one_logits(
    model: &Model,
    batch: &Batch,
    mode: Mode,
    dropout_seed: u64,
) -> Result<Array2<f64>> {
    let fwd = model.forward_stack(batch, mode, dropout_seed)?;
    let rows: Vec<(usize, usize)> = batch
        .lengths
        .iter()
        .enumerate()
        .map(|(b, &l)| (b, l - 1))
        .collect();
    Ok(model
        .head_forward(&Model::gather_rows(&fwd, fwd.top(), &rows))?
        .logits)
}

/// Mean cross-entropy of the final-step classifier.
pub fn many_to_one_loss(
    model: &Model,
    batch: &Batch,
    mode: Mode,
    dropout_seed: u64,
) -> Result<f64> {
    let logits = many_to_one_logits(model, batch, mode, dropout_seed)?;
    Ok(softmax_cross_entropy(&logits, &batch.labels)?.0)
}

/// GI cross-entropy evaluated on given top-stack features `(T * B, 2H)`.
///
/// Only the head sees `features`, so finite differences of this function
/// isolate the direct head connections from the recurrent stack.
pub fn gi_head_loss(model: &Model, batch: &Batch, features: &Array2<f64>) -> Result<f64> {
    let sel = gi_selection(batch, model.config.gi_k);
    let n = batch.size();
    let mut x = Array2::zeros((sel.rows.len(), features.ncols()));
    for (i, &(b, t)) in sel.rows.iter().enumerate() {
        x.row_mut(i).assign(&features.row(t * n + b));
    }
    let logits = model.head_forward(&x)?.logits;
    gi_loss(&split_by_sample(&logits, &sel, n), &batch.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_core::ModelConfig;
    use crate::pose_ingest::PoseVector;
    use ndarray::array;

    fn seq(len: usize, label: usize) -> PoseSequence {
        let frames = (0..len)
            .map(|t| {
                let mut v = [0.0; 36];
                for (j, x) in v.iter_mut().enumerate() {
                    *x = ((t * 7 + j * 3) % 11) as f64 - 5.0;
                }
                PoseVector::from_values(v)
            })
            .collect();
        PoseSequence {
            frames,
            label,
            clip_id: format!("s{len}"),
        }
    }

    fn tiny(k: usize) -> Model {
        Model::new(
            ModelConfig {
                blstm_layers: 1,
                hidden_size: 3,
                dense_hidden: 4,
                n_classes: 2,
                gi_k: k,
                ..Default::default()
            },
            4,
        )
        .unwrap()
    }

    #[test]
    fn selection_clamps_to_length() {
        let (a, b) = (seq(3, 0), seq(8, 1));
        let batch = Batch::from_sequences(&[&a, &b]).unwrap();
        let sel = gi_selection(&batch, 5);
        assert_eq!(
            sel.rows,
            vec![
                (0, 0),
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (1, 5),
                (1, 6),
                (1, 7)
            ]
        );
        assert!((sel.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let logits = forward_gi(&tiny(5), &batch, Mode::Infer, 0).unwrap();
        assert_eq!(logits[0].nrows(), 3);
        assert_eq!(logits[1].nrows(), 5);
    }

    #[test]
    fn loss_matches_hand_computed_mean() {
        let logits = array![[1.0, 0.0, -1.0], [0.5, 2.0, 0.0], [0.0, 0.0, 3.0]];
        let ce = |r: [f64; 3], y: usize| {
            let z: f64 = r.iter().map(|v| v.exp()).sum();
            z.ln() - r[y]
        };
        let expect =
            (ce([1.0, 0.0, -1.0], 1) + ce([0.5, 2.0, 0.0], 1) + ce([0.0, 0.0, 3.0], 1)) / 3.0;
        let got = gi_loss(&[logits], &[1]).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_steps_equal_single_step() {
        let one = array![[0.3, -1.2, 2.0]];
        let three = array![[0.3, -1.2, 2.0], [0.3, -1.2, 2.0], [0.3, -1.2, 2.0]];
        let a = gi_loss(std::slice::from_ref(&one), &[2]).unwrap();
        let b = gi_loss(&[three], &[2]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - softmax_cross_entropy(&one, &[2]).unwrap().0).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_mean_of_softmax() {
        let logits = array![[0.6f64.ln(), 0.4f64.ln()], [0.2f64.ln(), 0.8f64.ln()]];
        let p = ensemble_probabilities(&logits);
        assert!((p[0] - 0.4).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
        assert_eq!(argmax(&p), 1);
    }

    #[test]
    fn argmax_prefers_lower_index_on_ties() {
        assert_eq!(argmax(&array![0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn single_step_equals_many_to_one() {
        let model = tiny(1);
        let (a, b) = (seq(4, 0), seq(6, 1));
        let batch = Batch::from_sequences(&[&a, &b]).unwrap();
        let gi = gi_loss(
            &forward_gi(&model, &batch, Mode::Train, 9).unwrap(),
            &batch.labels,
        )
        .unwrap();
        let m2o = many_to_one_loss(&model, &batch, Mode::Train, 9).unwrap();
        assert!((gi - m2o).abs() < 1e-12);
        let p = predict(&model, &a).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn padding_and_batch_mates_do_not_change_predictions() {
        let model = tiny(3);
        let (a, b) = (seq(4, 0), seq(9, 1));
        let batch = Batch::from_sequences(&[&a, &b]).unwrap();
        let base = predict_batch(&model, &batch).unwrap();
        let padded = predict_batch(&model, &batch.padded_by(5)).unwrap();
        let alone = predict(&model, &a).unwrap();
        for (x, y) in base.iter().zip(&padded) {
            assert!((x - y).iter().all(|d| d.abs() < 1e-12));
        }
        assert!((&base[0] - &alone).iter().all(|d| d.abs() < 1e-12));
        let l0 = gi_loss(
            &forward_gi(&model, &batch, Mode::Train, 1).unwrap(),
            &batch.labels,
        )
        .unwrap();
        let l1 = gi_loss(
            &forward_gi(&model, &batch.padded_by(5), Mode::Train, 1).unwrap(),
            &batch.labels,
        )
        .unwrap();
        assert!((l0 - l1).abs() < 1e-12);
    }
}

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapCi};
use super::gi::{argmax, predict_batch};
use crate::error::{Error, Result};
use crate::neural_core::Model;
use crate::sequence_ops::{pad_and_batch, Dataset};

/// Classification quality on a labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// Bootstrap over per-sample top-1 correctness.
    pub bootstrap: BootstrapCi,
}

/// Whether `label` is among the `k` highest entries of `probs`.
///
/// A class outranks another if its probability is higher, or equal with a
/// lower index.
pub fn top_k_hit(probs: &Array1<f64>, label: usize, k: usize) -> bool {
    let p = probs[label];
    let above = probs
        .iter()
        .enumerate()
        .filter(|&(j, &q)| q > p || (q == p && j < label))
        .count();
    above < k
}

pub fn metrics_from_probabilities(
    probs: &[Array1<f64>],
    labels: &[usize],
    n_classes: usize,
    bootstrap_trials: usize,
    seed: u64,
) -> Result<Metrics> {
    if probs.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let n = probs.len();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut hits = [0usize; 3];
    let mut correct = Vec::with_capacity(n);
    for (p, &y) in probs.iter().zip(labels) {
        if p.len() != n_classes {
            return Err(Error::Shape(format!(
                "{} probabilities for {n_classes} classes",
                p.len()
            )));
        }
        if y >= n_classes {
            return Err(Error::Label {
                label: y,
                classes: n_classes,
            });
        }
        for (h, k) in hits.iter_mut().zip([1, 3, 5]) {
            if top_k_hit(p, y, k) {
                *h += 1;
            }
        }
        let pred = argmax(p);
        confusion[y][pred] += 1;
        correct.push(pred == y);
    }

    let mut precision = vec![0.0; n_classes];
    let mut recall = vec![0.0; n_classes];
    let mut f1 = vec![0.0; n_classes];
    for c in 0..n_classes {
        let tp = confusion[c][c] as f64;
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let actual: usize = confusion[c].iter().sum();
        if predicted > 0 {
            precision[c] = tp / predicted as f64;
        }
        if actual > 0 {
            recall[c] = tp / actual as f64;
        }
        if precision[c] + recall[c] > 0.0 {
            f1[c] = 2.0 * precision[c] * recall[c] / (precision[c] + recall[c]);
        }
    }
    let nf = n as f64;
    Ok(Metrics {
        n,
        top1: hits[0] as f64 / nf,
        top3: hits[1] as f64 / nf,
        top5: hits[2] as f64 / nf,
        macro_f1: f1.iter().sum::<f64>() / n_classes as f64,
        confusion,
        precision,
        recall,
        f1,
        bootstrap: bootstrap_ci(&correct, bootstrap_trials, seed)?,
    })
}

/// Ensemble predictions for every sequence of `data`, in dataset order.
pub(crate) fn predict_dataset(
    model: &Model,
    data: &Dataset,
    batch_size: usize,
) -> Result<Vec<Array1<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    for batch in pad_and_batch(&data.sequences, batch_size)? {
        out.extend(predict_batch(model, &batch)?);
    }
    Ok(out)
}

/// Evaluate `model` on `data` in infer mode.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    bootstrap_trials: usize,
    seed: u64,
) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let probs = predict_dataset(model, data, 64)?;
    let labels: Vec<usize> = data.sequences.iter().map(|s| s.label).collect();
    metrics_from_probabilities(
        &probs,
        &labels,
        model.config.n_classes,
        bootstrap_trials,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng as _;

    #[test]
    fn perfect_predictor() {
        let probs: Vec<_> = (0..6)
            .map(|i| Array1::from_shape_fn(3, |c| if c == i % 3 { 0.9 } else { 0.05 }))
            .collect();
        let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();
        let m = metrics_from_probabilities(&probs, &labels, 3, 50, 0).unwrap();
        assert_eq!((m.top1, m.top3, m.top5, m.macro_f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(
            m.confusion,
            vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]
        );
    }

    #[test]
    fn ties_rank_lower_index_first() {
        let p = array![0.25, 0.25, 0.25, 0.25];
        assert!(top_k_hit(&p, 0, 1));
        assert!(!top_k_hit(&p, 1, 1));
        assert!(top_k_hit(&p, 2, 3));
        assert!(!top_k_hit(&p, 3, 3));
    }

    #[test]
    fn absent_class_scores_zero_f1() {
        let probs = vec![array![0.9, 0.1, 0.0], array![0.2, 0.8, 0.0]];
        let m = metrics_from_probabilities(&probs, &[0, 1], 3, 10, 0).unwrap();
        assert_eq!(m.f1, vec![1.0, 1.0, 0.0]);
        assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_random_predictor_matches_expectation() {
        let (n, c) = (20_000, 4);
        let mut rng = rng_from_seed(77);
        let mut probs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = Array1::from_shape_simple_fn(c, || rng.random::<f64>());
            probs.push(&raw / raw.sum());
            labels.push(rng.random_range(0..c));
        }
        let m = metrics_from_probabilities(&probs, &labels, c, 1, 0).unwrap();
        for (got, p) in [(m.top1, 0.25), (m.top3, 0.75)] {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((got - p).abs() < 3.0 * sigma, "{got} vs {p}");
        }
        assert_eq!(m.top5, 1.0);
    }

    #[test]
    fn row_sums_equal_class_counts() {
        let probs = vec![
            array![0.5, 0.3, 0.2],
            array![0.1, 0.3, 0.6],
            array![0.3, 0.4, 0.3],
            array![0.2, 0.2, 0.6],
        ];
        let labels = [0, 0, 2, 1];
        let m = metrics_from_probabilities(&probs, &labels, 3, 5, 0).unwrap();
        let sums: Vec<usize> = m.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(sums, vec![2, 1, 1]);
        assert!(m.top1 <= m.top3 && m.top3 <= m.top5);
    }

    #[test]
    fn hand_table_matches_brute_force() {
        let rows = [
            ([0.70, 0.10, 0.15, 0.05, 0.00], 0),
            ([0.20, 0.50, 0.20, 0.10, 0.00], 2),
            ([0.25, 0.25, 0.25, 0.25, 0.00], 3),
            ([0.05, 0.05, 0.80, 0.05, 0.05], 2),
            ([0.30, 0.20, 0.10, 0.10, 0.30], 4),
            ([0.10, 0.60, 0.10, 0.10, 0.10], 1),
            ([0.40, 0.35, 0.05, 0.10, 0.10], 1),
            ([0.15, 0.15, 0.15, 0.15, 0.40], 0),
            ([0.00, 0.10, 0.20, 0.30, 0.40], 3),
            ([0.50, 0.10, 0.10, 0.20, 0.10], 0),
        ];
        let probs: Vec<_> = rows.iter().map(|(p, _)| Array1::from(p.to_vec())).collect();
        let labels: Vec<usize> = rows.iter().map(|&(_, y)| y).collect();
        let m = metrics_from_probabilities(&probs, &labels, 5, 50, 0).unwrap();
        assert_eq!((m.top1, m.top3, m.top5), (0.4, 0.9, 1.0));
        assert_eq!(
            m.confusion,
            vec![
                vec![2, 0, 0, 0, 1],
                vec![1, 1, 0, 0, 0],
                vec![0, 1, 1, 0, 0],
                vec![1, 0, 0, 0, 1],
                vec![1, 0, 0, 0, 0],
            ]
        );
        for (got, want) in m.f1.iter().zip([0.5, 0.5, 2.0 / 3.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(metrics_from_probabilities(&[], &[], 3, 5, 0).is_err());
    }
}

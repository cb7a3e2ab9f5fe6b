use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Max-subtracted softmax of one logit row.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.mapv(|z| (z - max).exp());
    let sum = p.sum();
    p /= sum;
    p
}

/// Mean categorical cross-entropy over the rows of `logits`, and the
/// row-wise probabilities.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (rows, classes) = logits.dim();
    if labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} labels for {rows} rows",
            labels.len()
        )));
    }
    if rows == 0 {
        return Err(Error::Empty("no logits".into()));
    }
    let mut probs = Array2::zeros((rows, classes));
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Label { label, classes });
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        probs.row_mut(r).assign(&softmax(row));
    }
    Ok((loss / rows as f64, probs))
}

/// Cross-entropy of a single row, via log-sum-exp.
pub(crate) fn row_cross_entropy(row: ArrayView1<f64>, label: usize) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() - row[label]
}

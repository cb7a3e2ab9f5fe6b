use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::pose_ingest::{PoseSequence, POSE_DIM};

/// Zero-padded mini-batch of sequences.
///
/// Padded steps have `time_mask == false`, zero values and a cleared entry mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `(batch, max_len, 36)`
    pub values: Array3<f64>,
    /// `(batch, max_len)`
    pub time_mask: Array2<bool>,
    /// `(batch, max_len, 36)`
    pub entry_mask: Array3<bool>,
    pub labels: Vec<usize>,
    pub lengths: Vec<usize>,
}

impl Batch {
    pub fn from_sequences(seqs: &[&PoseSequence]) -> Result<Batch> {
        if seqs.is_empty() {
            return Err(Error::Empty("batch with no sequences".into()));
        }
        let max_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let b = seqs.len();
        let mut values = Array3::zeros((b, max_len, POSE_DIM));
        let mut time_mask = Array2::from_elem((b, max_len), false);
        let mut entry_mask = Array3::from_elem((b, max_len, POSE_DIM), false);
        for (i, s) in seqs.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::EmptyClip(s.clip_id.clone()));
            }
            for (t, f) in s.frames.iter().enumerate() {
                time_mask[[i, t]] = true;
                for j in 0..POSE_DIM {
                    values[[i, t, j]] = f.values[j];
                    entry_mask[[i, t, j]] = f.mask[j];
                }
            }
        }
        Ok(Batch {
            values,
            time_mask,
            entry_mask,
            labels: seqs.iter().map(|s| s.label).collect(),
            lengths: seqs.iter().map(|s| s.len()).collect(),
        })
    }

    pub fn single(seq: &PoseSequence) -> Result<Batch> {
        Batch::from_sequences(&[seq])
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn max_len(&self) -> usize {
        self.time_mask.ncols()
    }

    /// Copy of this batch padded with `extra` additional empty steps.
    pub fn padded_by(&self, extra: usize) -> Batch {
        let (b, t, d) = self.values.dim();
        let mut out = Batch {
            values: Array3::zeros((b, t + extra, d)),
            time_mask: Array2::from_elem((b, t + extra), false),
            entry_mask: Array3::from_elem((b, t + extra, d), false),
            labels: self.labels.clone(),
            lengths: self.lengths.clone(),
        };
        out.values
            .slice_mut(ndarray::s![.., ..t, ..])
            .assign(&self.values);
        out.time_mask
            .slice_mut(ndarray::s![.., ..t])
            .assign(&self.time_mask);
        out.entry_mask
            .slice_mut(ndarray::s![.., ..t, ..])
            .assign(&self.entry_mask);
        out
    }
}

/// Group sequences in order into batches of at most `batch_size`, each padded
/// to its own longest member.
pub fn pad_and_batch(seqs: &[PoseSequence], batch_size: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch_size must be >= 1".into()));
    }
    seqs.chunks(batch_size)
        .map(|chunk| Batch::from_sequences(&chunk.iter().collect::<Vec<_>>()))
        .collect()
}

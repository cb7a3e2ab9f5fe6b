use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::pose_ingest::{PoseSequence, PoseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DfdConfig {
    /// Frames closer than this (pixels) to the last kept frame are dropped.
    pub cutoff: f64,
}

impl Default for DfdConfig {
    fn default() -> Self {
        DfdConfig { cutoff: 15.0 }
    }
}

impl DfdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff.is_nan() || self.cutoff < 0.0 {
            return Err(Error::Parameter(format!(
                "dfd cutoff must be >= 0, got {}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// Euclidean distance over the entries valid in both frames.
///
/// Returns `f64::INFINITY` when the frames share no valid entry.
pub fn frame_distance(a: &PoseVector, b: &PoseVector) -> f64 {
    let mut any = false;
    let mut sum = 0.0;
    for j in 0..a.values.len() {
        if a.mask[j] && b.mask[j] {
            any = true;
            let d = a.values[j] - b.values[j];
            sum += d * d;
        }
    }
    if any {
        sum.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Indices of frames kept by dynamic frame dropout, in order.
///
/// The first frame is always kept. Each later frame is dropped iff its
/// distance to the most recently kept frame is below the cutoff.
pub fn dfd_kept_indices(seq: &PoseSequence, cfg: &DfdConfig) -> Vec<usize> {
    let mut kept = Vec::with_capacity(seq.frames.len());
    if seq.frames.is_empty() {
        return kept;
    }
    kept.push(0);
    let mut anchor = &seq.frames[0];
    for (t, frame) in seq.frames.iter().enumerate().skip(1) {
        if frame_distance(anchor, frame) < cfg.cutoff {
            continue;
        }
        kept.push(t);
        anchor = frame;
    }
    kept
}

pub fn dynamic_frame_dropout(seq: &PoseSequence, cfg: &DfdConfig) -> PoseSequence {
    let frames = dfd_kept_indices(seq, cfg)
        .into_iter()
        .map(|t| seq.frames[t])
        .collect();
    seq.with_frames(frames)
}

/// Per-clip frame counts before and after dropout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfdStats {
    pub clip_id: String,
    pub frames_before: usize,
    pub frames_after: usize,
}

impl DfdStats {
    pub fn dropped(&self) -> usize {
        self.frames_before - self.frames_after
    }
}

pub fn dfd_dataset(data: &Dataset, cfg: &DfdConfig) -> (Dataset, Vec<DfdStats>) {
    let out = data.map_sequences(|s| dynamic_frame_dropout(s, cfg));
    let stats = data
        .sequences
        .iter()
        .zip(&out.sequences)
        .map(|(a, b)| DfdStats {
            clip_id: a.clip_id.clone(),
            frames_before: a.len(),
            frames_after: b.len(),
        })
        .collect();
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_ingest::POSE_DIM;

    fn seq_from_offsets(offsets: &[f64]) -> PoseSequence {
        PoseSequence {
            frames: offsets
                .iter()
                .map(|&o| PoseVector::from_values([100.0 + o; POSE_DIM]))
                .collect(),
            label: 0,
            clip_id: "c".into(),
        }
    }

    #[test]
    fn distance_examples() {
        let a = PoseVector::from_values([3.0; POSE_DIM]);
        let b = PoseVector::from_values([4.0; POSE_DIM]);
        assert_eq!(frame_distance(&a, &b), 6.0);
        assert_eq!(frame_distance(&a, &a), 0.0);
        assert_eq!(frame_distance(&PoseVector::zeros(), &a), f64::INFINITY);
    }

    #[test]
    fn distance_ignores_entries_masked_in_either_frame() {
        let a = PoseVector::from_values([0.0; POSE_DIM]);
        let mut valid = [true; POSE_DIM / 2];
        valid[0] = false;
        let b = PoseVector::with_keypoint_mask([1.0; POSE_DIM], &valid);
        assert_eq!(frame_distance(&a, &b), (34.0f64).sqrt());
    }

    #[test]
    fn mixed_deltas_match_literal_scan() {
        // Per-entry deltas +1, +3, +1, +1, +3 between consecutive frames.
        let s = seq_from_offsets(&[0.0, 1.0, 4.0, 5.0, 6.0, 9.0]);
        assert_eq!(dfd_kept_indices(&s, &DfdConfig::default()), vec![0, 2, 5]);
        let out = dynamic_frame_dropout(&s, &DfdConfig::default());
        assert_eq!(out.frames, vec![s.frames[0], s.frames[2], s.frames[5]]);
        assert_eq!((out.label, out.clip_id.as_str()), (0, "c"));
    }

    #[test]
    fn kept_count_can_grow_with_cutoff() {
        // Frame distances are 6x the offset differences.
        let s = seq_from_offsets(&[0.0, 1.6, 3.0, 0.4, 2.4]);
        assert_eq!(dfd_kept_indices(&s, &DfdConfig { cutoff: 9.0 }), vec![0, 1]);
        assert_eq!(
            dfd_kept_indices(&s, &DfdConfig { cutoff: 11.4 }),
            vec![0, 2, 3, 4]
        );
    }

    #[test]
    fn identical_frames_collapse_to_one() {
        let s = seq_from_offsets(&[0.0; 8]);
        assert_eq!(dfd_kept_indices(&s, &DfdConfig::default()), vec![0]);
    }

    #[test]
    fn large_steps_keep_everything() {
        let offs: Vec<f64> = (0..6).map(|t| 3.0 * t as f64).collect();
        let s = seq_from_offsets(&offs);
        assert_eq!(dfd_kept_indices(&s, &DfdConfig::default()).len(), 6);
    }

    #[test]
    fn anchor_is_last_kept_frame() {
        // Steps of +1 (d = 6) accumulate until the gap from the anchor reaches 15.
        let offs: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let s = seq_from_offsets(&offs);
        // d(anchor, t) = 6 * (t - anchor): kept when t - anchor >= 2.5, i.e. every 3rd.
        assert_eq!(
            dfd_kept_indices(&s, &DfdConfig::default()),
            vec![0, 3, 6, 9]
        );
    }

    #[test]
    fn zero_cutoff_is_identity() {
        let s = seq_from_offsets(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(dynamic_frame_dropout(&s, &DfdConfig { cutoff: 0.0 }), s);
    }

    #[test]
    fn infinite_cutoff_keeps_first_and_disjoint_frames() {
        let mut s = seq_from_offsets(&[0.0, 500.0, 0.0]);
        s.frames.push(PoseVector::zeros());
        let kept = dfd_kept_indices(
            &s,
            &DfdConfig {
                cutoff: f64::INFINITY,
            },
        );
        assert_eq!(kept, vec![0, 3]);
    }

    #[test]
    fn negative_cutoff_rejected() {
        assert!(DfdConfig { cutoff: -1.0 }.validate().is_err());
        assert!(DfdConfig { cutoff: f64::NAN }.validate().is_err());
    }
}

//! Keypoint ingestion: parse extractor exports, suppress low-confidence
//! keypoints and flatten each frame into a 36-entry pose vector.

mod export;
pub mod format;

pub use export::{parse_keypoint_export, ParsedExport};

use crate::error::{Error, Result};

/// Keypoints per skeleton (single person, 18-joint layout).
pub const N_POSE: usize = 18;
/// Length of a flattened pose vector: (x, y) per keypoint.
pub const POSE_DIM: usize = N_POSE * 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawKeypoint {
    pub x: f64,
    pub y: f64,
    pub conf: f64,
}

impl RawKeypoint {
    pub fn new(x: f64, y: f64, conf: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parameter(format!(
                "keypoint coordinates must be finite, got ({x}, {y})"
            )));
        }
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::Parameter(format!(
                "keypoint confidence must be in [0, 1], got {conf}"
            )));
        }
        Ok(RawKeypoint { x, y, conf })
    }
}

/// One frame of extractor output for a single person.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoseFrame {
    pub frame_index: u64,
    pub keypoints: [RawKeypoint; N_POSE],
}

/// A flattened frame: `(x0, y0, x1, y1, ...)` with a per-entry validity mask.
///
/// A keypoint is always suppressed whole, and suppressed entries hold 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseVector {
    pub values: [f64; POSE_DIM],
    pub mask: [bool; POSE_DIM],
}

impl PoseVector {
    pub fn zeros() -> Self {
        PoseVector {
            values: [0.0; POSE_DIM],
            mask: [false; POSE_DIM],
        }
    }

    /// Fully valid vector from raw values.
    pub fn from_values(values: [f64; POSE_DIM]) -> Self {
        PoseVector {
            values,
            mask: [true; POSE_DIM],
        }
    }

    /// Build from values and a per-keypoint validity flag, zeroing suppressed keypoints.
    pub fn with_keypoint_mask(mut values: [f64; POSE_DIM], valid: &[bool; N_POSE]) -> Self {
        let mut mask = [false; POSE_DIM];
        for (k, &ok) in valid.iter().enumerate() {
            mask[2 * k] = ok;
            mask[2 * k + 1] = ok;
            if !ok {
                values[2 * k] = 0.0;
                values[2 * k + 1] = 0.0;
            }
        }
        PoseVector { values, mask }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Checks the keypoint-pairing and mask/zero invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..N_POSE {
            if self.mask[2 * k] != self.mask[2 * k + 1] {
                return Err(Error::Constraint(format!(
                    "keypoint {k} has a half-masked coordinate pair"
                )));
            }
        }
        for (j, (&v, &m)) in self.values.iter().zip(&self.mask).enumerate() {
            if !m && v != 0.0 {
                return Err(Error::Constraint(format!(
                    "masked entry {j} holds non-zero value {v}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Constraint(format!("entry {j} is not finite")));
            }
        }
        Ok(())
    }
}

/// A clip as a masked `(n_frame, 36)` matrix plus its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseVector>,
    pub label: usize,
    pub clip_id: String,
}

impl PoseSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Same label and id, different frames.
    pub fn with_frames(&self, frames: Vec<PoseVector>) -> Self {
        PoseSequence {
            frames,
            label: self.label,
            clip_id: self.clip_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Keypoints with confidence strictly below this are suppressed.
    pub theta: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { theta: 0.1 }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Parameter(format!(
                "theta must be in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Suppress keypoints below the confidence threshold and flatten to a pose vector.
pub fn threshold_and_flatten(frame: &RawPoseFrame, cfg: &PreprocessConfig) -> PoseVector {
    let mut values = [0.0; POSE_DIM];
    let mut valid = [false; N_POSE];
    for (k, kp) in frame.keypoints.iter().enumerate() {
        values[2 * k] = kp.x;
        values[2 * k + 1] = kp.y;
        valid[k] = kp.conf >= cfg.theta;
    }
    PoseVector::with_keypoint_mask(values, &valid)
}

pub fn build_sequence(
    frames: Vec<PoseVector>,
    label: usize,
    clip_id: impl Into<String>,
) -> Result<PoseSequence> {
    let clip_id = clip_id.into();
    if frames.is_empty() {
        return Err(Error::EmptyClip(clip_id));
    }
    Ok(PoseSequence {
        frames,
        label,
        clip_id,
    })
}

/// Parse an export document and run the full preprocessing chain on it.
pub fn preprocess_export(
    document: &str,
    clip_id: &str,
    label: usize,
    cfg: &PreprocessConfig,
) -> Result<(PoseSequence, usize)> {
    cfg.validate()?;
    let parsed = parse_keypoint_export(document, clip_id)?;
    let frames = parsed
        .frames
        .iter()
        .map(|f| threshold_and_flatten(f, cfg))
        .collect();
    Ok((
        build_sequence(frames, label, clip_id)?,
        parsed.skipped_empty,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_with(f: impl Fn(usize) -> RawKeypoint) -> RawPoseFrame {
        RawPoseFrame {
            frame_index: 0,
            keypoints: std::array::from_fn(f),
        }
    }

    #[test]
    fn low_confidence_keypoint_is_suppressed() {
        let frame = frame_with(|i| RawKeypoint {
            x: 10.0 + i as f64,
            y: 20.0,
            conf: if i == 4 { 0.05 } else { 0.9 },
        });
        let v = threshold_and_flatten(&frame, &PreprocessConfig { theta: 0.1 });
        assert_eq!(v.values[8], 0.0);
        assert_eq!(v.values[9], 0.0);
        assert!(!v.mask[8] && !v.mask[9]);
        assert_eq!(v.valid_count(), 34);
        assert_eq!(v.values[10], 15.0);
        v.check_invariants().unwrap();
    }

    #[test]
    fn full_confidence_is_identity_flattening() {
        let frame = frame_with(|i| RawKeypoint {
            x: i as f64,
            y: i as f64 + 0.5,
            conf: 1.0,
        });
        let v = threshold_and_flatten(&frame, &PreprocessConfig::default());
        let expected: Vec<f64> = (0..N_POSE)
            .flat_map(|i| [i as f64, i as f64 + 0.5])
            .collect();
        assert_eq!(v.values.to_vec(), expected);
        assert!(v.mask.iter().all(|&m| m));
    }

    #[test]
    fn zero_theta_suppresses_nothing() {
        let frame = frame_with(|i| RawKeypoint {
            x: 1.0,
            y: 2.0,
            conf: if i % 2 == 0 { 0.0 } else { 0.3 },
        });
        let v = threshold_and_flatten(&frame, &PreprocessConfig { theta: 0.0 });
        assert_eq!(v.valid_count(), POSE_DIM);
    }

    #[test]
    fn build_sequence_counts_and_rejects_empty() {
        let seq = build_sequence(vec![PoseVector::zeros(); 40], 2, "c").unwrap();
        assert_eq!(seq.len(), 40);
        assert_eq!(
            build_sequence(vec![PoseVector::zeros()], 0, "c")
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            build_sequence(vec![], 0, "empty"),
            Err(Error::EmptyClip(id)) if id == "empty"
        ));
    }

    #[test]
    fn keypoint_validation() {
        assert!(RawKeypoint::new(f64::NAN, 0.0, 0.5).is_err());
        assert!(RawKeypoint::new(0.0, 0.0, 1.5).is_err());
        assert!(RawKeypoint::new(3.0, 4.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn raising_theta_never_adds_valid_entries(
            confs in proptest::collection::vec(0.0f64..=1.0, N_POSE),
            coords in proptest::collection::vec(-500.0f64..500.0, POSE_DIM),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let frame = frame_with(|i| RawKeypoint { x: coords[2 * i], y: coords[2 * i + 1], conf: confs[i] });
            let a = threshold_and_flatten(&frame, &PreprocessConfig { theta: lo });
            let b = threshold_and_flatten(&frame, &PreprocessConfig { theta: hi });
            prop_assert!(b.valid_count() <= a.valid_count());
            a.check_invariants().unwrap();
            b.check_invariants().unwrap();
        }
    }
}

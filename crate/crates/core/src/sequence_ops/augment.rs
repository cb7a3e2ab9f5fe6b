use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::pose_ingest::{PoseSequence, POSE_DIM};
use crate::rng::{derive_seed, rng_from_seed, sub_rng};

/// Shift every valid x entry by `dx` and every valid y entry by `dy`.
pub fn augment_translate(seq: &PoseSequence, dx: f64, dy: f64) -> PoseSequence {
    let mut out = seq.clone();
    for f in &mut out.frames {
        for j in 0..POSE_DIM {
            if f.mask[j] {
                f.values[j] += if j % 2 == 0 { dx } else { dy };
            }
        }
    }
    out
}

/// Scale valid coordinates by `s` about the sequence's valid-coordinate centroid.
pub fn augment_scale(seq: &PoseSequence, s: f64) -> Result<PoseSequence> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Parameter(format!(
            "scale factor must be > 0, got {s}"
        )));
    }
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    for f in &seq.frames {
        for j in 0..POSE_DIM {
            if f.mask[j] {
                sum[j % 2] += f.values[j];
                count[j % 2] += 1;
            }
        }
    }
    if count[0] == 0 {
        return Ok(seq.clone());
    }
    let center = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let mut out = seq.clone();
    for f in &mut out.frames {
        for j in 0..POSE_DIM {
            if f.mask[j] {
                let c = center[j % 2];
                f.values[j] = c + s * (f.values[j] - c);
            }
        }
    }
    Ok(out)
}

/// Add one Gaussian offset vector, drawn once from `seed`, to every frame.
pub fn augment_noise(seq: &PoseSequence, sigma: f64, seed: u64) -> Result<PoseSequence> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let offset: [f64; POSE_DIM] = std::array::from_fn(|_| normal.sample(&mut rng));
    let mut out = seq.clone();
    for f in &mut out.frames {
        for ((v, &m), o) in f.values.iter_mut().zip(&f.mask).zip(&offset) {
            if m {
                *v += o;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    Translate,
    Scale,
    Noise,
    /// Translation and scaling drawn together.
    Affine,
}

impl AugmentMode {
    pub const ALL: [AugmentMode; 4] = [
        AugmentMode::Translate,
        AugmentMode::Scale,
        AugmentMode::Noise,
        AugmentMode::Affine,
    ];

    pub fn id(self) -> u64 {
        match self {
            AugmentMode::Translate => 0,
            AugmentMode::Scale => 1,
            AugmentMode::Noise => 2,
            AugmentMode::Affine => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AugmentMode::Translate => "translate",
            AugmentMode::Scale => "scale",
            AugmentMode::Noise => "noise",
            AugmentMode::Affine => "affine",
        }
    }
}

/// Number of augmented copies generated per original, by mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentCopies {
    pub translate: usize,
    pub scale: usize,
    pub noise: usize,
    pub affine: usize,
}

impl AugmentCopies {
    pub fn get(&self, mode: AugmentMode) -> usize {
        match mode {
            AugmentMode::Translate => self.translate,
            AugmentMode::Scale => self.scale,
            AugmentMode::Noise => self.noise,
            AugmentMode::Affine => self.affine,
        }
    }

    pub fn total(&self) -> usize {
        AugmentMode::ALL.iter().map(|&m| self.get(m)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSpec {
    /// Maximum |dx|, |dy| in pixels.
    pub translate_range: f64,
    /// Closed interval the scale factor is drawn from.
    pub scale_range: (f64, f64),
    /// Per-coordinate standard deviation of the noise offset, in pixels.
    pub noise_sigma: f64,
    pub copies: AugmentCopies,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            translate_range: 20.0,
            scale_range: (0.8, 1.2),
            noise_sigma: 2.0,
            copies: AugmentCopies::default(),
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.translate_range >= 0.0) || !self.translate_range.is_finite() {
            return Err(Error::Parameter(format!(
                "translate_range must be >= 0, got {}",
                self.translate_range
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Parameter(format!(
                "scale_range must be positive and ordered, got ({lo}, {hi})"
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Parameter(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Produce one augmented copy, drawing parameters from `seed`.
    pub fn apply(&self, seq: &PoseSequence, mode: AugmentMode, seed: u64) -> Result<PoseSequence> {
        let mut rng = rng_from_seed(seed);
        let r = self.translate_range;
        let (lo, hi) = self.scale_range;
        match mode {
            AugmentMode::Translate => {
                let dx = rng.random_range(-r..=r);
                let dy = rng.random_range(-r..=r);
                Ok(augment_translate(seq, dx, dy))
            }
            AugmentMode::Scale => augment_scale(seq, rng.random_range(lo..=hi)),
            AugmentMode::Noise => augment_noise(seq, self.noise_sigma, derive_seed(seed, &[1])),
            AugmentMode::Affine => {
                let s = rng.random_range(lo..=hi);
                let dx = rng.random_range(-r..=r);
                let dy = rng.random_range(-r..=r);
                Ok(augment_translate(&augment_scale(seq, s)?, dx, dy))
            }
        }
    }
}

/// Append augmented copies of every original sequence.
///
/// Originals come first, unchanged. Copies follow in (original, mode, copy)
/// order; each draws from its own sub-seed of `master_seed`, so the output
/// does not depend on processing order.
pub fn augment_dataset(data: &Dataset, spec: &AugmentSpec, master_seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut out = data.clone();
    if spec.copies.total() == 0 {
        return Ok(out);
    }
    for (i, (seq, prov)) in data.sequences.iter().zip(&data.provenance).enumerate() {
        if *prov != Provenance::Original {
            continue;
        }
        for mode in AugmentMode::ALL {
            for c in 0..spec.copies.get(mode) {
                let seed = sub_rng(master_seed, &[i as u64, mode.id(), c as u64]).random();
                let mut copy = spec.apply(seq, mode, seed)?;
                copy.clip_id = format!("{}~{}{}", seq.clip_id, mode.name(), c);
                out.sequences.push(copy);
                out.provenance.push(Provenance::Augmented {
                    source: seq.clip_id.clone(),
                });
            }
        }
    }
    Ok(out)
}

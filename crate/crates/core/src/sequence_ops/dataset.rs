use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::pose_ingest::PoseSequence;

/// Where a sequence came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Original,
    /// Augmented copy of the clip with the given id.
    Augmented {
        source: String,
    },
}

/// Labeled collection of pose sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub sequences: Vec<PoseSequence>,
    /// Parallel to `sequences`.
    pub provenance: Vec<Provenance>,
}

impl Dataset {
    /// Dataset of original (non-augmented) sequences.
    pub fn new(class_names: Vec<String>, sequences: Vec<PoseSequence>) -> Result<Self> {
        let provenance = vec![Provenance::Original; sequences.len()];
        let d = Dataset {
            class_names,
            sequences,
            provenance,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() < 2 {
            return Err(Error::Parameter(format!(
                "a dataset needs at least 2 classes, got {}",
                self.class_names.len()
            )));
        }
        if self.provenance.len() != self.sequences.len() {
            return Err(Error::Shape(format!(
                "{} provenance flags for {} sequences",
                self.provenance.len(),
                self.sequences.len()
            )));
        }
        for s in &self.sequences {
            if s.label >= self.class_names.len() {
                return Err(Error::Label {
                    label: s.label,
                    classes: self.class_names.len(),
                });
            }
            if s.frames.is_empty() {
                return Err(Error::EmptyClip(s.clip_id.clone()));
            }
        }
        Ok(())
    }

    /// Id of the original clip a sequence derives from.
    pub fn source_id(&self, i: usize) -> &str {
        match &self.provenance[i] {
            Provenance::Original => &self.sequences[i].clip_id,
            Provenance::Augmented { source } => source,
        }
    }

    pub fn source_ids(&self) -> BTreeSet<&str> {
        (0..self.len()).map(|i| self.source_id(i)).collect()
    }

    pub fn originals(&self) -> impl Iterator<Item = &PoseSequence> {
        self.sequences
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| **p == Provenance::Original)
            .map(|(s, _)| s)
    }

    /// Subset by index, keeping class names and provenance.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            class_names: self.class_names.clone(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            provenance: indices
                .iter()
                .map(|&i| self.provenance[i].clone())
                .collect(),
        }
    }

    /// Apply a per-sequence transform, keeping labels and provenance.
    pub fn map_sequences(&self, f: impl Fn(&PoseSequence) -> PoseSequence) -> Dataset {
        Dataset {
            class_names: self.class_names.clone(),
            sequences: self.sequences.iter().map(f).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn total_frames(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }
}

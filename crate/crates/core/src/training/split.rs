use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sequence_ops::Dataset;

/// How a dataset is divided into a training part and a held-out part.
///
/// Augmented copies always follow their source clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSplit {
    /// Hold out this fraction of source clips from each class, chosen at random.
    Fraction { fraction: f64 },
    /// Hold out the source clips whose id matches the regular expression.
    Pattern { pattern: String },
}

impl Default for EvalSplit {
    fn default() -> Self {
        EvalSplit::Fraction { fraction: 0.2 }
    }
}

impl EvalSplit {
    pub fn validate(&self) -> Result<()> {
        match self {
            EvalSplit::Fraction { fraction } if !(0.0..1.0).contains(fraction) => Err(
                Error::Parameter(format!("split fraction must be in [0, 1), got {fraction}")),
            ),
            EvalSplit::Pattern { pattern } => Regex::new(pattern)
                .map(|_| ())
                .map_err(|e| Error::Parameter(format!("split pattern: {e}"))),
            _ => Ok(()),
        }
    }
}

/// Returns `(kept, held_out)`.
pub fn split_dataset(data: &Dataset, split: &EvalSplit, seed: u64) -> Result<(Dataset, Dataset)> {
    split.validate()?;
    let held: BTreeSet<String> = match split {
        EvalSplit::Fraction { fraction } => {
            let mut by_class: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
            for i in 0..data.len() {
                by_class
                    .entry(data.sequences[i].label)
                    .or_default()
                    .insert(data.source_id(i));
            }
            let mut rng = rng_from_seed(seed);
            let mut held = BTreeSet::new();
            for ids in by_class.values() {
                let mut ids: Vec<&str> = ids.iter().copied().collect();
                ids.shuffle(&mut rng);
                let take = (fraction * ids.len() as f64).round() as usize;
                held.extend(ids[..take].iter().map(|s| s.to_string()));
            }
            held
        }
        EvalSplit::Pattern { pattern } => {
            let re =
                Regex::new(pattern).map_err(|e| Error::Parameter(format!("split pattern: {e}")))?;
            data.source_ids()
                .into_iter()
                .filter(|id| re.is_match(id))
                .map(str::to_string)
                .collect()
        }
    };
    let (out, keep): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| held.contains(data.source_id(i)));
    Ok((data.select(&keep), data.select(&out)))
}

/// Fails if the two sets share a source clip.
pub fn check_disjoint(a: &Dataset, b: &Dataset) -> Result<()> {
    let ids = a.source_ids();
    match b.source_ids().into_iter().find(|id| ids.contains(id)) {
        Some(id) => Err(Error::Constraint(format!(
            "clip `{id}` appears on both sides of a split"
        ))),
        None => Ok(()),
    }
}

//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::Serialize;

use super::{ParamKind, ParamSet};
use crate::rng::rng_from_seed;

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub per_kind: BTreeMap<ParamKind, KindReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_kind
            .values()
            .map(|k| k.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.per_kind.values().map(|k| k.checked).sum()
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        !self.per_kind.is_empty() && self.max_rel_error() < tolerance
    }
}

/// Compare `analytic` against central differences of `loss` at `params`.
///
/// With `max_per_tensor = Some(n)` at most `n` entries of each tensor are
/// probed, chosen with `seed`; every tensor (and so every kind) is covered.
pub fn check_gradients<P, F>(
    params: &P,
    analytic: &P,
    mut loss: F,
    epsilon: f64,
    max_per_tensor: Option<usize>,
    seed: u64,
) -> GradCheckReport
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = params.clone();
    let mut rng = rng_from_seed(seed);
    let mut per_kind: BTreeMap<ParamKind, KindReport> = BTreeMap::new();
    let grads = analytic.views();
    let layout: Vec<(String, ParamKind, usize)> = params
        .views()
        .iter()
        .map(|v| (v.name.clone(), v.kind, v.data.len()))
        .collect();

    for (t, (name, kind, len)) in layout.iter().enumerate() {
        let indices: Vec<usize> = match max_per_tensor {
            Some(n) if n < *len => {
                let mut idx = sample(&mut rng, *len, n).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..*len).collect(),
        };
        for i in indices {
            let original = probe.views()[t].data[i];
            probe.views_mut()[t].data[i] = original + epsilon;
            let up = loss(&probe);
            probe.views_mut()[t].data[i] = original - epsilon;
            let down = loss(&probe);
            probe.views_mut()[t].data[i] = original;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = grads[t].data[i];
            let err = relative_error(a, numeric);
            let entry = per_kind.entry(*kind).or_insert_with(|| KindReport {
                checked: 0,
                max_rel_error: -1.0,
                worst_param: String::new(),
                worst_index: 0,
                analytic: 0.0,
                numeric: 0.0,
            });
            entry.checked += 1;
            if err > entry.max_rel_error {
                entry.max_rel_error = err;
                entry.worst_param = name.clone();
                entry.worst_index = i;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
    }
    GradCheckReport { epsilon, per_kind }
}

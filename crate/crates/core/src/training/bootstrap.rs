use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Bootstrap estimate of accuracy with a 95% percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub trials: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Percentile `q` in `[0, 1]` of sorted values, interpolating linearly
/// between neighbouring ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resample `correct` with replacement `trials` times; return the mean of
/// the resample accuracies and their 2.5% and 97.5% percentiles.
pub fn bootstrap_ci(correct: &[bool], trials: usize, seed: u64) -> Result<BootstrapCi> {
    if correct.is_empty() {
        return Err(Error::Empty("bootstrap over no samples".into()));
    }
    if trials == 0 {
        return Err(Error::Parameter(
            "bootstrap needs at least one trial".into(),
        ));
    }
    let n = correct.len();
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = (0..trials)
        .map(|_| {
            let hits = (0..n).filter(|_| correct[rng.random_range(0..n)]).count();
            hits as f64 / n as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / trials as f64;
    means.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        trials,
        mean,
        lo: percentile(&means, 0.025),
        hi: percentile(&means, 0.975),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_flags() {
        let all = bootstrap_ci(&[true; 7], 50, 1).unwrap();
        assert_eq!((all.mean, all.lo, all.hi), (1.0, 1.0, 1.0));
        let none = bootstrap_ci(&[false; 7], 50, 1).unwrap();
        assert_eq!((none.mean, none.lo, none.hi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_and_zero_trials_are_errors() {
        assert!(bootstrap_ci(&[], 50, 0).is_err());
        assert!(bootstrap_ci(&[true], 0, 0).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!((percentile(&v, 0.025) - 0.1).abs() < 1e-15);
        assert!((percentile(&v, 0.975) - 3.9).abs() < 1e-15);
    }

    #[test]
    fn interval_brackets_mean() {
        let flags: Vec<bool> = (0..40).map(|i| i % 3 != 0).collect();
        let ci = bootstrap_ci(&flags, 200, 5).unwrap();
        assert!(ci.lo <= ci.mean && ci.mean <= ci.hi);
        assert!((ci.mean - 27.0 / 40.0).abs() < 0.05);
        assert_eq!(ci, bootstrap_ci(&flags, 200, 5).unwrap());
    }
}

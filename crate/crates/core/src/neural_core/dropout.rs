use ndarray::Array2;
use rand::Rng as _;

use super::Mode;
use crate::rng::rng_from_seed;

/// Inverted dropout. Returns the output and, in train mode with a positive
/// rate, the per-entry scale (`0` or `1 / (1 - rate)`) used for the backward pass.
pub fn dropout_forward(
    x: &Array2<f64>,
    rate: f64,
    mode: Mode,
    seed: u64,
) -> (Array2<f64>, Option<Array2<f64>>) {
    if mode == Mode::Infer || rate == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mut rng = rng_from_seed(seed);
    let factors = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            0.0
        }
    });
    (x * &factors, Some(factors))
}

//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceConfig {
    /// Initial bracket width.
    pub width: f64,
    pub max_steps_out: usize,
    pub max_shrinks: usize,
    /// Support of the target; the density is zero outside.
    pub lower: f64,
    pub upper: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_steps_out: 100,
            max_shrinks: 100,
            lower: -10.0,
            upper: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDraw {
    pub value: f64,
    /// False when shrinkage gave up and `value` is the starting point.
    pub accepted: bool,
}

/// One slice-sampling update of `x0` for the log-density `log_f`.
pub fn slice_sample<R, F>(x0: f64, mut log_f: F, config: &SliceConfig, rng: &mut R) -> SliceDraw
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = (config.lower, config.upper);
    let mut density = |x: f64| if x < lo || x > hi { f64::NEG_INFINITY } else { log_f(x) };
    let height = density(x0) + rng.random::<f64>().ln();

    let mut left = x0 - config.width * rng.random::<f64>();
    let mut right = left + config.width;
    let steps = config.max_steps_out;
    let mut left_steps = (steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut right_steps = steps.saturating_sub(1).saturating_sub(left_steps);
    while left_steps > 0 && left > lo && density(left) > height {
        left -= config.width;
        left_steps -= 1;
    }
    while right_steps > 0 && right < hi && density(right) > height {
        right += config.width;
        right_steps -= 1;
    }
    left = left.max(lo);
    right = right.min(hi);

    for _ in 0..config.max_shrinks {
        let x = left + rng.random::<f64>() * (right - left);
        if density(x) > height {
            return SliceDraw { value: x, accepted: true };
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
    }
    SliceDraw { value: x0, accepted: false }
}

use serde::{Deserialize, Serialize};

use super::{ElmModel, run_trials};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub accuracy: f64,
    pub iterations: usize,
}

/// Bisect the stopping threshold until the batch accuracy reaches
/// `target_accuracy`. Every candidate threshold is scored on the same trials
/// (same targets and seeds), so accuracy is close to monotone in the threshold.
/// Returns the smallest bracketed threshold whose accuracy meets the target.
pub fn calibrate_threshold(model: &ElmModel, target_accuracy: f64, n_trials: usize, seed: u64, iterations: usize) -> CalibrationResult {
    let mut m = model.clone();
    let mut score = |theta: f64| {
        m.threshold = theta;
        run_trials(&m, n_trials, seed).1.accuracy()
    };
    // Search over the log-odds of the threshold.
    let (mut lo, mut hi) = (0.0f64, 8.0f64);
    let to_theta = |z: f64| 1.0 / (1.0 + (-z).exp());
    let mut hi_acc = score(to_theta(hi));
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let acc = score(to_theta(mid));
        if acc >= target_accuracy {
            hi = mid;
            hi_acc = acc;
        } else {
            lo = mid;
        }
    }
    CalibrationResult { threshold: to_theta(hi), accuracy: hi_acc, iterations }
}

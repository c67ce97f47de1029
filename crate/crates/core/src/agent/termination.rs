use serde::{Deserialize, Serialize};

use super::detector::{DETECTION_THRESHOLD_DEG, DetectorOutput};

/// Two consecutive predicted target locations must agree within this distance.
pub const CONFIRM_DISTANCE_DEG: f64 = 0.5;
pub const MAX_FIXATIONS_TRAIN: usize = 50;
pub const MAX_FIXATIONS_TEST: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Continue,
    Stop,
    Timeout,
}

/// Double-check-and-stop rule on the last two detector outputs, with a
/// fixation-count cap.
pub fn check_termination(prev: &DetectorOutput, last: &DetectorOutput, fixations: usize, max_fixations: usize) -> Termination {
    let confirmed = prev.err_est_deg < DETECTION_THRESHOLD_DEG
        && last.err_est_deg < DETECTION_THRESHOLD_DEG
        && prev.target_abs_pred().dist(last.target_abs_pred()) < CONFIRM_DISTANCE_DEG;
    if confirmed {
        Termination::Stop
    } else if fixations >= max_fixations {
        Termination::Timeout
    } else {
        Termination::Continue
    }
}

//! Per-trial record shared by every searcher (ELM, agent, human sessions).

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// A response counts as correct when it lands within this distance of the target.
pub const CORRECT_RADIUS_DEG: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Error,
    Timeout,
}

impl Outcome {
    pub fn is_correct(self) -> bool {
        self == Outcome::Correct
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub target_deg: Vec2,
    /// All fixations in order, the initial (imposed) one first.
    pub fixations_deg: Vec<Vec2>,
    #[serde(default)]
    pub rewards: Vec<f64>,
    #[serde(default)]
    pub err_est: Vec<f64>,
    pub outcome: Outcome,
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_deg: Option<Vec2>,
}

impl TrialRecord {
    pub fn fixation_count(&self) -> usize {
        self.fixations_deg.len()
    }

    /// Saccade amplitudes between consecutive fixations (deg).
    pub fn saccade_amplitudes(&self) -> Vec<f64> {
        self.fixations_deg.windows(2).map(|w| w[1].dist(w[0])).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

pub fn is_correct_response(response: Vec2, target: Vec2) -> bool {
    response.dist(target) <= CORRECT_RADIUS_DEG
}

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SacAmpKind {
    Exp,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub ior_radius: f64,
    pub ior_memory: usize,
    pub sacamp_kind: SacAmpKind,
    pub exp_scale: f64,
    pub linear_scale: f64,
    pub gamma: f64,
}

impl RewardConfig {
    /// Short IOR radius, exponential amplitude cost.
    pub fn hp1() -> Self {
        Self { ior_radius: 0.5, ior_memory: 8, sacamp_kind: SacAmpKind::Exp, exp_scale: 2.5, linear_scale: 7.5, gamma: 0.95 }
    }

    /// Wide IOR radius, linear amplitude cost.
    pub fn hp2() -> Self {
        Self { ior_radius: 2.5, sacamp_kind: SacAmpKind::Linear, ..Self::hp1() }
    }

    pub fn hp(group: u8) -> Option<Self> {
        match group {
            1 => Some(Self::hp1()),
            2 => Some(Self::hp2()),
            _ => None,
        }
    }

    /// Total reward for moving from `history.last()` to `next`.
    pub fn reward(&self, history: &[Vec2], next: Vec2) -> f64 {
        let amp = history.last().map_or(0.0, |p| p.dist(next));
        ior_reward(history, next, self.ior_radius, self.ior_memory) + sacamp_reward(amp, self)
    }
}

/// Semicircle penalty around each of the last `memory` fixations, taking the
/// strongest (most negative) one.
pub fn ior_reward(history: &[Vec2], next: Vec2, r: f64, memory: usize) -> f64 {
    let start = history.len().saturating_sub(memory);
    history[start..]
        .iter()
        .map(|p| {
            let d2 = p.dist(next).powi(2);
            -(r * r - d2).max(0.0).sqrt() / r
        })
        .fold(0.0, f64::min)
}

pub fn sacamp_reward(amplitude_deg: f64, cfg: &RewardConfig) -> f64 {
    match cfg.sacamp_kind {
        SacAmpKind::Exp => -0.5 + 0.5 * ((-amplitude_deg / cfg.exp_scale).exp() - 1.0),
        SacAmpKind::Linear => -amplitude_deg / cfg.linear_scale,
    }
}

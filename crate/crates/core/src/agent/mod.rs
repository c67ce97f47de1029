//! The search agent: a pluggable detector, spiking memory and actor, reward
//! shaping and the double-check stopping rule.

mod detector;
mod env;
pub mod head;
mod policy;
mod rewards;
mod termination;

pub use detector::{DETECTION_THRESHOLD_DEG, Detector, DetectorOutput, OracleDetector, OracleDetectorConfig, Scene};
pub use env::{AgentConfig, AgentStep, AgentTrial, DETECTION_COV_PX2, InitialFixation, TEST_START_RADIUS_DEG, initial_fixation, run_agent_trial, run_agent_trials, sample_scene};
pub use policy::{
    ACTOR_UNITS, ActorGrad, ActorNet, ActorTrace, CircularScan, HEAD_OUTPUTS, RNN_UNITS, RandomPolicy, SearchPolicy, SpikingPolicy, action_to_deg,
    clip_to_square, deg_to_action, half_span_deg, rnn_input,
};
pub use rewards::{RewardConfig, SacAmpKind, ior_reward, sacamp_reward};
pub use termination::{CONFIRM_DISTANCE_DEG, MAX_FIXATIONS_TEST, MAX_FIXATIONS_TRAIN, Termination, check_termination};

/// Contrast range used at test time.
pub const TEST_CONTRAST_RANGE: (f64, f64) = (0.11, 0.136);
/// Contrast range used during training.
pub const TRAIN_CONTRAST_RANGE: (f64, f64) = (0.11, 0.15);

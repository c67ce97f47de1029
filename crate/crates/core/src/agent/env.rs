use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::detector::{Detector, DetectorOutput, Scene};
use super::policy::{SearchPolicy, clip_to_square};
use super::rewards::RewardConfig;
use super::termination::{MAX_FIXATIONS_TEST, Termination, check_termination};
use crate::geom::Vec2;
use crate::stimulus::{GaborSpec, ScreenGeometry, max_target_eccentricity_deg, sample_in_disk};
use crate::trial::{Outcome, TrialRecord, is_correct_response};

/// Covariance of the fixation sampled around a detected target (px^2).
pub const DETECTION_COV_PX2: f64 = 15.0;
/// Test-time initial fixations fall within this radius of the centre.
pub const TEST_START_RADIUS_DEG: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialFixation {
    /// Uniform within `TEST_START_RADIUS_DEG` of the centre.
    Test,
    /// Uniform over the search disk.
    Train,
    Fixed(Vec2),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_fixations: usize,
    pub reward: RewardConfig,
    pub initial: InitialFixation,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { max_fixations: MAX_FIXATIONS_TEST, reward: RewardConfig::hp2(), initial: InitialFixation::Test }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub fixation: Vec2,
    pub detector: DetectorOutput,
    /// Next fixation and how it was chosen; absent on the final fixation.
    pub next: Option<Vec2>,
    pub detection_branch: bool,
    pub reward: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrial {
    pub scene: Scene,
    pub steps: Vec<AgentStep>,
    pub outcome: Outcome,
    /// True when the trial ended by the double-check rule (not by the cap).
    pub terminated: bool,
}

impl AgentTrial {
    pub fn clipped_samples(&self) -> usize {
        self.steps.iter().filter(|s| s.clipped).count()
    }

    pub fn record(&self, seed: u64, policy: &str) -> TrialRecord {
        TrialRecord {
            seed,
            target_deg: self.scene.target_deg,
            fixations_deg: self.steps.iter().map(|s| s.fixation).collect(),
            rewards: self.steps.iter().filter(|s| s.next.is_some()).map(|s| s.reward).collect(),
            err_est: self.steps.iter().map(|s| s.detector.err_est_deg).collect(),
            outcome: self.outcome,
            policy: policy.to_string(),
            response_deg: self.steps.last().map(|s| s.fixation),
        }
    }
}

pub fn initial_fixation(init: InitialFixation, rng: &mut dyn RngCore) -> Vec2 {
    match init {
        InitialFixation::Test => sample_in_disk(rng, TEST_START_RADIUS_DEG),
        InitialFixation::Train => sample_in_disk(rng, crate::stimulus::SEARCH_IMAGE_SPAN_DEG / 2.0),
        InitialFixation::Fixed(v) => v,
    }
}

/// Uniform target location (full patch inside the disk) and a contrast drawn
/// uniformly from `contrast_range`.
pub fn sample_scene(rng: &mut dyn RngCore, contrast_range: (f64, f64)) -> Scene {
    let geom = ScreenGeometry::default();
    let r = max_target_eccentricity_deg(geom.image_diameter_px(), &GaborSpec::default());
    let target_deg = sample_in_disk(rng, r);
    let contrast = if contrast_range.1 > contrast_range.0 { rng.random_range(contrast_range.0..contrast_range.1) } else { contrast_range.0 };
    Scene { target_deg, contrast }
}

/// One search trial: detect, update memory, check the stop rule, then saccade
/// either near the detected target or where the policy proposes.
pub fn run_agent_trial(scene: &Scene, detector: &dyn Detector, policy: &mut dyn SearchPolicy, cfg: &AgentConfig, seed: u64) -> AgentTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    policy.reset();
    let ppd = ScreenGeometry::default().px_per_deg();
    let det_sd = DETECTION_COV_PX2.sqrt() / ppd;
    let mut fixation = initial_fixation(cfg.initial, &mut rng);
    let mut steps: Vec<AgentStep> = Vec::new();
    let mut history: Vec<Vec2> = vec![fixation];
    let (outcome, terminated) = loop {
        let out = detector.detect(scene, fixation, &mut rng);
        policy.observe(&out);
        steps.push(AgentStep { fixation, detector: out, next: None, detection_branch: false, reward: 0.0, clipped: false });
        let n = steps.len();
        let state = if n >= 2 {
            check_termination(&steps[n - 2].detector, &out, n, cfg.max_fixations)
        } else if n >= cfg.max_fixations {
            Termination::Timeout
        } else {
            Termination::Continue
        };
        match state {
            Termination::Stop => {
                let hit = steps[n.saturating_sub(2)..].iter().any(|s| is_correct_response(s.fixation, scene.target_deg));
                break (if hit { Outcome::Correct } else { Outcome::Error }, true);
            }
            Termination::Timeout => break (Outcome::Timeout, false),
            Termination::Continue => {}
        }
        let (raw, detection_branch) = if out.detected() {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            (out.target_abs_pred() + Vec2::new(zx * det_sd, zy * det_sd), true)
        } else {
            (policy.propose(fixation, &mut rng), false)
        };
        let (next, clipped) = clip_to_square(raw);
        let reward = cfg.reward.reward(&history, next);
        let last = steps.last_mut().expect("just pushed");
        last.next = Some(next);
        last.detection_branch = detection_branch;
        last.reward = reward;
        last.clipped = clipped;
        history.push(next);
        fixation = next;
    };
    AgentTrial { scene: *scene, steps, outcome, terminated }
}

/// `n` trials with scenes and per-trial seeds drawn from one stream.
pub fn run_agent_trials(detector: &dyn Detector, policy: &mut dyn SearchPolicy, cfg: &AgentConfig, contrast_range: (f64, f64), n: usize, seed: u64) -> Vec<(u64, AgentTrial)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let scene = sample_scene(&mut rng, contrast_range);
            let s = rng.next_u64();
            (s, run_agent_trial(&scene, detector, policy, cfg, s))
        })
        .collect()
}

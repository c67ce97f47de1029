use std::collections::VecDeque;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, StoredTrial};
use super::sac::{SacAgent, SacConfig, UpdateStats, sac_update};
use crate::agent::{
    ACTOR_UNITS, AgentConfig, InitialFixation, MAX_FIXATIONS_TRAIN, OracleDetector, OracleDetectorConfig, RNN_UNITS, RandomPolicy, RewardConfig,
    SpikingPolicy, TRAIN_CONTRAST_RANGE, run_agent_trial, run_agent_trials, sample_scene,
};
use crate::error::{Error, Result};

/// Abort when the smoothed return stays below the random-policy baseline for
/// `consecutive` trials once `after_trials` have been run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRule {
    pub after_trials: usize,
    pub consecutive: usize,
    pub smoothing: usize,
    pub baseline_trials: usize,
}

impl Default for DivergenceRule {
    fn default() -> Self {
        Self { after_trials: 2000, consecutive: 500, smoothing: 100, baseline_trials: 200 }
    }
}

/// Streaming check of [`DivergenceRule`] against a fixed baseline return.
#[derive(Clone, Debug)]
pub struct DivergenceMonitor {
    pub rule: DivergenceRule,
    pub baseline: f64,
    below: usize,
}

impl DivergenceMonitor {
    pub fn new(rule: DivergenceRule, baseline: f64) -> Self {
        Self { rule, baseline, below: 0 }
    }

    /// Feed the smoothed return after trial `i`; returns a report when the
    /// rule fires.
    pub fn observe(&mut self, i: usize, smoothed: f64) -> Option<String> {
        if i >= self.rule.after_trials && smoothed < self.baseline {
            self.below += 1;
        } else {
            self.below = 0;
        }
        (self.below >= self.rule.consecutive).then(|| {
            format!("smoothed return {smoothed:.3} stayed below the random baseline {:.3} for {} trials (stopped at trial {i})", self.baseline, self.below)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hp: u8,
    pub trials: usize,
    pub sac: SacConfig,
    pub agent: AgentConfig,
    pub detector: OracleDetectorConfig,
    pub contrast_range: (f64, f64),
    pub rnn_units: usize,
    pub actor_units: usize,
    pub divergence: DivergenceRule,
}

impl TrainConfig {
    /// Desk-scale settings for reward preset 1 or 2.
    pub fn hp(hp: u8) -> Result<Self> {
        let reward = RewardConfig::hp(hp).ok_or_else(|| Error::Config(format!("unknown reward preset {hp}")))?;
        let sac = SacConfig::hp(hp);
        Ok(Self {
            hp,
            trials: sac.max_trials,
            agent: AgentConfig { max_fixations: MAX_FIXATIONS_TRAIN, reward, initial: InitialFixation::Train },
            sac,
            detector: OracleDetectorConfig::default(),
            contrast_range: TRAIN_CONTRAST_RANGE,
            rnn_units: RNN_UNITS,
            actor_units: ACTOR_UNITS,
            divergence: DivergenceRule::default(),
        })
    }
}

/// One line of the training curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub trial: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub correct: bool,
    pub fixations: usize,
    /// Over the last `smoothing` trials.
    pub percent_correct: f64,
    pub mean_fixations: f64,
    pub mean_return: f64,
    pub updates: u64,
    pub skipped_updates: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor_loss: Option<f64>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
}

pub struct TrainResult {
    pub agent: SacAgent,
    pub curves: Vec<CurvePoint>,
    pub baseline_return: f64,
    /// Set when training stopped early under the divergence rule.
    pub diverged: Option<String>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

/// Mean return of uniformly random saccades under the training settings.
pub fn random_baseline_return(cfg: &TrainConfig, seed: u64) -> f64 {
    let det = OracleDetector::new(cfg.detector);
    let trials = run_agent_trials(&det, &mut RandomPolicy, &cfg.agent, cfg.contrast_range, cfg.divergence.baseline_trials, seed);
    mean(trials.iter().map(|(_, t)| t.steps.iter().map(|s| s.reward).sum::<f64>()))
}

/// Alternate single trials with one optimisation step per fixation of the
/// trial just played. Warm-up trials use random saccades.
pub fn train(cfg: &TrainConfig, seed: u64, on_trial: &mut dyn FnMut(&CurvePoint)) -> Result<TrainResult> {
    cfg.sac.validate()?;
    cfg.detector.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = SpikingPolicy::init(cfg.rnn_units, cfg.actor_units, &mut rng);
    let mut agent = SacAgent::new(cfg.sac.clone(), policy, &mut rng)?;
    let baseline_return = random_baseline_return(cfg, rng.next_u64());
    let det = OracleDetector::new(cfg.detector);
    let mut buffer = ReplayBuffer::new(cfg.sac.replay_capacity);
    let mut window: VecDeque<(f64, bool, usize)> = VecDeque::with_capacity(cfg.divergence.smoothing);
    let mut curves = Vec::with_capacity(cfg.trials);
    let mut monitor = DivergenceMonitor::new(cfg.divergence, baseline_return);
    let mut diverged = None;
    for i in 0..cfg.trials {
        let scene = sample_scene(&mut rng, cfg.contrast_range);
        let tseed = rng.next_u64();
        let trial = if i < cfg.sac.warmup_trials {
            run_agent_trial(&scene, &det, &mut RandomPolicy, &cfg.agent, tseed)
        } else {
            run_agent_trial(&scene, &det, &mut agent.policy, &cfg.agent, tseed)
        };
        buffer.push(StoredTrial::from_agent_trial(&trial));
        let mut stats: Vec<UpdateStats> = Vec::new();
        if buffer.len() >= cfg.sac.warmup_trials {
            for _ in 0..trial.steps.len() {
                stats.extend(sac_update(&mut agent, &buffer, &mut rng));
            }
        }
        let ret: f64 = trial.steps.iter().map(|s| s.reward).sum();
        if window.len() == cfg.divergence.smoothing {
            window.pop_front();
        }
        window.push_back((ret, trial.outcome.is_correct(), trial.steps.len()));
        let stat = |f: fn(&UpdateStats) -> f64| (!stats.is_empty()).then(|| mean(stats.iter().map(f)));
        let pt = CurvePoint {
            trial: i,
            ret,
            correct: trial.outcome.is_correct(),
            fixations: trial.steps.len(),
            percent_correct: 100.0 * mean(window.iter().map(|w| if w.1 { 1.0 } else { 0.0 })),
            mean_fixations: mean(window.iter().map(|w| w.2 as f64)),
            mean_return: mean(window.iter().map(|w| w.0)),
            updates: agent.updates,
            skipped_updates: agent.skipped_updates,
            critic_loss: stat(|s| s.critic_loss),
            actor_loss: stat(|s| s.actor_loss),
            alpha: agent.alpha(),
            entropy: stat(|s| s.entropy),
        };
        on_trial(&pt);
        curves.push(pt);
        if let Some(report) = monitor.observe(i, pt.mean_return) {
            diverged = Some(report);
            break;
        }
    }
    Ok(TrainResult { agent, curves, baseline_return, diverged })
}

/// Mean return over the first and last `fraction` of the curve.
pub fn decile_returns(curves: &[CurvePoint], fraction: f64) -> (f64, f64) {
    let k = ((curves.len() as f64 * fraction).round() as usize).clamp(1, curves.len().max(1));
    let first = mean(curves.iter().take(k).map(|c| c.ret));
    let last = mean(curves.iter().rev().take(k).map(|c| c.ret));
    (first, last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitor_fires_after_consecutive_run() {
        let rule = DivergenceRule { after_trials: 2000, consecutive: 500, smoothing: 100, baseline_trials: 10 };
        let mut m = DivergenceMonitor::new(rule, -5.0);
        for i in 0..2000 {
            assert!(m.observe(i, -9.0).is_none());
        }
        for i in 2000..2499 {
            assert!(m.observe(i, -9.0).is_none());
        }
        assert!(m.observe(2499, -9.0).is_some());
    }

    #[test]
    fn monitor_resets_on_recovery() {
        let rule = DivergenceRule { after_trials: 0, consecutive: 3, smoothing: 1, baseline_trials: 1 };
        let mut m = DivergenceMonitor::new(rule, 0.0);
        assert!(m.observe(0, -1.0).is_none());
        assert!(m.observe(1, -1.0).is_none());
        assert!(m.observe(2, 1.0).is_none());
        assert!(m.observe(3, -1.0).is_none());
        assert!(m.observe(4, -1.0).is_none());
        assert!(m.observe(5, -1.0).is_some());
    }

    #[test]
    fn decile_means() {
        let pt = |i: usize, ret: f64| CurvePoint {
            trial: i, ret, correct: true, fixations: 1, percent_correct: 100.0, mean_fixations: 1.0, mean_return: ret,
            updates: 0, skipped_updates: 0, critic_loss: None, actor_loss: None, alpha: 1.0, entropy: None,
        };
        let c: Vec<CurvePoint> = (0..20).map(|i| pt(i, i as f64)).collect();
        assert_eq!(decile_returns(&c, 0.1), (0.5, 18.5));
    }
}

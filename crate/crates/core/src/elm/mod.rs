//! Entropy-limit-minimisation (ELM) Bayesian searcher on a fixed grid of
//! candidate target/fixation locations.

mod calibrate;

pub use calibrate::{CalibrationResult, calibrate_threshold};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::stimulus::SEARCH_IMAGE_SPAN_DEG;
use crate::trial::{Outcome, TrialRecord, is_correct_response};
use crate::visibility::{SEARCH_FIXATION_MS, VisibilityParams};

pub const DEFAULT_GRID_SIZE: usize = 400;
pub const MAX_FIXATIONS: usize = 200;
pub const DPRIME_FLOOR: f64 = 1e-6;

/// Sunflower (Fibonacci) layout of `n` points filling a disk of `radius` deg.
pub fn build_grid(n: usize, radius: f64) -> Result<Vec<Vec2>> {
    if n < 4 {
        return Err(Error::Config(format!("grid needs at least 4 points, got {n}")));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    Ok((0..n)
        .map(|k| {
            let r = radius * ((k as f64 + 0.5) / n as f64).sqrt();
            let th = k as f64 * golden;
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect())
}

/// Grid, visibility table and stopping rule; immutable and shareable across trials.
#[derive(Clone, Debug)]
pub struct ElmModel {
    grid: Vec<Vec2>,
    /// `dprime[l * n + i]`: d' of location `i` while fixating location `l`.
    dprime: Vec<f64>,
    dprime_sq: Vec<f64>,
    pub threshold: f64,
    pub max_fixations: usize,
    start: usize,
}

impl ElmModel {
    pub fn new(params: &VisibilityParams, threshold: f64) -> Result<Self> {
        Self::with_grid(params, build_grid(DEFAULT_GRID_SIZE, SEARCH_IMAGE_SPAN_DEG / 2.0)?, threshold)
    }

    pub fn with_grid(params: &VisibilityParams, grid: Vec<Vec2>, threshold: f64) -> Result<Self> {
        if !params.is_valid() {
            return Err(Error::Config("visibility parameters must be positive and finite".into()));
        }
        let dprime_fn = |target: Vec2, fix: Vec2| params.dprime(target - fix, SEARCH_FIXATION_MS);
        Self::from_dprime_fn(grid, dprime_fn, threshold)
    }

    /// Build from an arbitrary d' function `(target, fixation) -> d'`.
    pub fn from_dprime_fn<F: Fn(Vec2, Vec2) -> f64>(grid: Vec<Vec2>, f: F, threshold: f64) -> Result<Self> {
        let n = grid.len();
        if n < 2 {
            return Err(Error::Config("grid needs at least 2 points".into()));
        }
        let mut dprime = Vec::with_capacity(n * n);
        for &l in &grid {
            for &i in &grid {
                let d = f(i, l);
                if !(d >= 0.0) || d.is_infinite() {
                    return Err(Error::NonFinite("d' table entry"));
                }
                dprime.push(d.max(DPRIME_FLOOR));
            }
        }
        let dprime_sq = dprime.iter().map(|d| d * d).collect();
        let start = nearest_index(&grid, Vec2::ZERO);
        Ok(Self { grid, dprime, dprime_sq, threshold, max_fixations: MAX_FIXATIONS, start })
    }

    pub fn grid(&self) -> &[Vec2] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dprime(&self, target: usize, fixation: usize) -> f64 {
        self.dprime[fixation * self.len() + target]
    }

    fn row(&self, fixation: usize) -> &[f64] {
        let n = self.len();
        &self.dprime[fixation * n..(fixation + 1) * n]
    }

    fn row_sq(&self, fixation: usize) -> &[f64] {
        let n = self.len();
        &self.dprime_sq[fixation * n..(fixation + 1) * n]
    }

    /// Grid index closest to the image centre (the imposed first fixation).
    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn nearest(&self, loc: Vec2) -> usize {
        nearest_index(&self.grid, loc)
    }

    /// Noisy template responses at every grid location for one fixation:
    /// `W_i ~ N(+-0.5, 1/d'^2)` with the positive mean only at the target.
    pub fn draw_signals<R: rand::Rng + ?Sized>(&self, fixation: usize, target: usize, rng: &mut R) -> Vec<f64> {
        self.row(fixation)
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let mean = if i == target { 0.5 } else { -0.5 };
                let z: f64 = StandardNormal.sample(rng);
                mean + z / d
            })
            .collect()
    }

    /// Location maximising the expected information gain `sum_i P_i d'^2(i, L)`;
    /// ties go to the lowest index.
    pub fn next_fixation(&self, posterior: &Posterior) -> usize {
        let p = posterior.probabilities();
        let mut best = (0, f64::NEG_INFINITY);
        for l in 0..self.len() {
            let gain: f64 = p.iter().zip(self.row_sq(l)).map(|(a, b)| a * b).sum();
            if gain > best.1 {
                best = (l, gain);
            }
        }
        best.0
    }

    pub fn run_trial(&self, target: usize, seed: u64) -> ElmTrial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut post = Posterior::uniform(self.len());
        let mut fixation = self.start;
        let mut fixations = vec![fixation];
        let mut entropies = Vec::new();
        let timed_out = loop {
            let w = self.draw_signals(fixation, target, &mut rng);
            post.update(&w, self.row_sq(fixation)).expect("stable update cannot underflow");
            entropies.push(post.entropy());
            if post.probabilities()[fixation] > self.threshold || self.threshold <= 0.0 {
                break false;
            }
            if fixations.len() >= self.max_fixations {
                break true;
            }
            fixation = self.next_fixation(&post);
            fixations.push(fixation);
        };
        let response = fixation;
        let outcome = if timed_out {
            Outcome::Timeout
        } else if is_correct_response(self.grid[response], self.grid[target]) {
            Outcome::Correct
        } else {
            Outcome::Error
        };
        ElmTrial { target, fixations, response, outcome, entropies }
    }

    pub fn trial_record(&self, trial: &ElmTrial, seed: u64) -> TrialRecord {
        TrialRecord {
            seed,
            target_deg: self.grid[trial.target],
            fixations_deg: trial.fixations.iter().map(|&i| self.grid[i]).collect(),
            rewards: Vec::new(),
            err_est: Vec::new(),
            outcome: trial.outcome,
            policy: "elm".into(),
            response_deg: Some(self.grid[trial.response]),
        }
    }
}

fn nearest_index(grid: &[Vec2], loc: Vec2) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, g) in grid.iter().enumerate() {
        let d = g.dist(loc);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmTrial {
    pub target: usize,
    /// Grid indices, the imposed first fixation included.
    pub fixations: Vec<usize>,
    pub response: usize,
    pub outcome: Outcome,
    /// Posterior entropy (nats) after each fixation.
    pub entropies: Vec<f64>,
}

/// Posterior over target location, kept in log space between updates.
#[derive(Clone, Debug)]
pub struct Posterior {
    log_p: Vec<f64>,
    p: Vec<f64>,
}

impl Posterior {
    pub fn uniform(n: usize) -> Self {
        Self { log_p: vec![0.0; n], p: vec![1.0 / n as f64; n] }
    }

    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonFinite("prior probability"));
        }
        let mut post = Self { log_p: p.iter().map(|v| v.ln()).collect(), p: vec![0.0; p.len()] };
        post.normalize()?;
        Ok(post)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Multiply by `exp(W_i d'^2_i)` and renormalise.
    pub fn update(&mut self, w: &[f64], dprime_sq: &[f64]) -> Result<()> {
        if w.len() != self.len() || dprime_sq.len() != self.len() {
            return Err(Error::Shape("signal / d' length differs from posterior".into()));
        }
        for ((lp, wi), d2) in self.log_p.iter_mut().zip(w).zip(dprime_sq) {
            *lp += wi * d2;
        }
        self.normalize()
    }

    fn normalize(&mut self) -> Result<()> {
        let max = self.log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::PosteriorUnderflow);
        }
        let mut sum = 0.0;
        for (lp, p) in self.log_p.iter_mut().zip(self.p.iter_mut()) {
            *lp -= max;
            *p = lp.exp();
            sum += *p;
        }
        let ln_sum = sum.ln();
        for (lp, p) in self.log_p.iter_mut().zip(self.p.iter_mut()) {
            *lp -= ln_sum;
            *p /= sum;
        }
        Ok(())
    }

    pub fn entropy(&self) -> f64 {
        -self.p.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElmBatchSummary {
    pub trials: usize,
    pub correct: usize,
    pub timeouts: usize,
}

impl ElmBatchSummary {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.trials.max(1) as f64
    }
}

/// Target index and trial seed for trial `k` of a run seeded with `seed`.
pub fn trial_setup(n_grid: usize, seed: u64, k: usize) -> (usize, u64) {
    use rand::Rng;
    let trial_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0xA5A5_5A5A);
    (rng.random_range(0..n_grid), trial_seed)
}

pub fn run_trials(model: &ElmModel, n_trials: usize, seed: u64) -> (Vec<ElmTrial>, ElmBatchSummary) {
    let mut summary = ElmBatchSummary { trials: n_trials, ..Default::default() };
    let trials: Vec<ElmTrial> = (0..n_trials)
        .map(|k| {
            let (target, s) = trial_setup(model.len(), seed, k);
            let t = model.run_trial(target, s);
            match t.outcome {
                Outcome::Correct => summary.correct += 1,
                Outcome::Timeout => summary.timeouts += 1,
                Outcome::Error => {}
            }
            t
        })
        .collect();
    (trials, summary)
}

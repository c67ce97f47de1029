use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TwoIfcRecord, VisibilityParams};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::optim::NelderMead;

/// Log-uniform sampling box for the random starts, one `(lo, hi)` per parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub ranges: [(f64, f64); 5],
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            ranges: [(0.02, 5.0), (0.005, 1.0), (1e-3, 0.1), (0.005, 0.5), (0.2, 5.0)],
            n_starts: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub params: VisibilityParams,
    /// Mean squared d' error at `params`.
    pub loss: f64,
    /// Loss at each random start (before descent); discarded starts are absent.
    pub start_losses: Vec<f64>,
    pub discarded_starts: usize,
}

/// An observed d' at one condition.
#[derive(Clone, Copy, Debug)]
struct Obs {
    loc: Vec2,
    duration_ms: f64,
    dprime: f64,
}

fn mse(p: &VisibilityParams, obs: &[Obs]) -> f64 {
    let s: f64 = obs.iter().map(|o| (p.dprime(o.loc, o.duration_ms) - o.dprime).powi(2)).sum();
    s / obs.len() as f64
}

fn from_log(x: &[f64]) -> VisibilityParams {
    VisibilityParams::from_array([x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp(), x[4].exp()])
}

pub fn fit_visibility(records: &[TwoIfcRecord]) -> Result<VisibilityFit> {
    fit_visibility_with(records, &FitBounds::default())
}

/// Least-squares fit of the d' field to the d' observed in each record,
/// multi-start simplex descent in log-parameter space.
pub fn fit_visibility_with(records: &[TwoIfcRecord], bounds: &FitBounds) -> Result<VisibilityFit> {
    if records.len() < 10 {
        return Err(Error::Config(format!("need at least 10 records, got {}", records.len())));
    }
    let mut eccs: Vec<f64> = records.iter().map(|r| r.target_loc_deg.norm()).collect();
    eccs.sort_by(f64::total_cmp);
    eccs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if eccs.len() < 3 {
        return Err(Error::Config("records must span at least 3 eccentricities".into()));
    }
    if bounds.n_starts == 0 {
        return Err(Error::Config("n_starts must be positive".into()));
    }
    let obs: Vec<Obs> = records
        .iter()
        .map(|r| Obs { loc: r.target_loc_deg, duration_ms: r.duration_ms, dprime: r.observed_dprime() })
        .collect();
    let loss = |x: &[f64]| {
        let v = mse(&from_log(x), &obs);
        if v.is_finite() { v } else { f64::INFINITY }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    let nm = NelderMead { max_evals: 3000, f_tol: 1e-16, x_tol: 1e-9, initial_step: 0.3, restarts: 3 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut start_losses = Vec::with_capacity(bounds.n_starts);
    let mut discarded = 0;
    for _ in 0..bounds.n_starts {
        let x0: Vec<f64> = bounds.ranges.iter().map(|&(lo, hi)| rng.random_range(lo.ln()..hi.ln())).collect();
        let l0 = loss(&x0);
        if !l0.is_finite() {
            discarded += 1;
            continue;
        }
        start_losses.push(l0);
        let m = nm.minimize(loss, &x0);
        if m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value));
        }
    }
    let (x, value) = best.ok_or(Error::NonFinite("visibility loss"))?;
    Ok(VisibilityFit { params: from_log(&x), loss: value, start_losses, discarded_starts: discarded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visibility::normal_cdf;
    use rand_distr::{Distribution, Normal};

    fn design() -> Vec<(Vec2, f64)> {
        let mut out = Vec::new();
        for &(x, y) in &[(0.0, 0.0), (1.5, 0.0), (3.0, 0.0), (5.0, 0.0), (7.0, 0.0), (0.0, 2.0), (0.0, 4.0), (2.5, 2.5), (-4.0, -3.0)] {
            for &t in &[30.0, 80.0, 150.0, 250.0, 500.0, 1000.0] {
                out.push((Vec2::new(x, y), t));
            }
        }
        out
    }

    /// A record whose rates invert to exactly `d`.
    fn exact_record(loc: Vec2, t: f64, d: f64) -> TwoIfcRecord {
        let p = normal_cdf(d / std::f64::consts::SQRT_2);
        TwoIfcRecord { target_loc_deg: loc, duration_ms: t, hit_rate: p, cr_rate: p, n_trials: 1 << 40 }
    }

    #[test]
    fn noiseless_recovery() {
        let truth = VisibilityParams::reference();
        let recs: Vec<_> = design().into_iter().map(|(l, t)| exact_record(l, t, truth.dprime(l, t))).collect();
        let fit = fit_visibility(&recs).unwrap();
        for (a, b) in fit.params.to_array().iter().zip(truth.to_array()) {
            assert!(((a - b) / b).abs() < 0.01, "{:?}", fit.params);
        }
        assert!(fit.start_losses.iter().all(|&l| fit.loss <= l));
    }

    /// Wide grid of eccentricities and durations; the leak-rate falloff is only
    /// weakly expressed in d', so it needs many repeated observations.
    fn dense_design() -> Vec<(Vec2, f64)> {
        let mut locs: Vec<Vec2> = (0..8).map(|x| Vec2::new(x as f64, 0.0)).collect();
        locs.extend((1..6).map(|y| Vec2::new(0.0, y as f64)));
        locs.extend([Vec2::new(3.0, 3.0), Vec2::new(-5.0, -4.0), Vec2::new(2.0, -5.0)]);
        let mut out = Vec::new();
        for l in locs {
            for t in [20.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0] {
                out.push((l, t));
            }
        }
        out
    }

    #[test]
    fn noisy_recovery() {
        // 128 noisy d' observations per condition, each with sd 0.1. The
        // squared-error loss depends on them only through the per-condition
        // mean, so each condition is entered once at its pooled mean.
        let truth = VisibilityParams::reference();
        let reps = 128;
        for seed in [11, 12] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.1).unwrap();
            let recs: Vec<_> = dense_design()
                .into_iter()
                .map(|(l, t)| {
                    let mean = (0..reps).map(|_| noise.sample(&mut rng)).sum::<f64>() / reps as f64;
                    exact_record(l, t, truth.dprime(l, t) + mean)
                })
                .collect();
            let fit = fit_visibility(&recs).unwrap();
            for (a, b) in fit.params.to_array().iter().zip(truth.to_array()) {
                assert!(((a - b) / b).abs() < 0.10, "seed {seed}: {:?}", fit.params);
            }
            assert!((fit.params.dprime(Vec2::ZERO, 250.0) - 3.0).abs() < 0.05);
        }
    }

    #[test]
    fn rejects_thin_designs() {
        let truth = VisibilityParams::reference();
        let few: Vec<_> = design().into_iter().take(5).map(|(l, t)| exact_record(l, t, truth.dprime(l, t))).collect();
        assert!(fit_visibility(&few).is_err());
        let two_ecc: Vec<_> = (0..12)
            .map(|i| {
                let l = Vec2::new(if i % 2 == 0 { 0.0 } else { 2.0 }, 0.0);
                exact_record(l, 100.0 + i as f64, 1.0)
            })
            .collect();
        assert!(fit_visibility(&two_ecc).is_err());
    }
}

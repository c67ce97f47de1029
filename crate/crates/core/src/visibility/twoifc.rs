use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{VisibilityParams, dprime_from_rates};
use crate::geom::Vec2;

/// Outcome of a block of two-interval forced-choice trials at one condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoIfcRecord {
    #[serde(rename = "loc_deg")]
    pub target_loc_deg: Vec2,
    pub duration_ms: f64,
    #[serde(rename = "hit")]
    pub hit_rate: f64,
    #[serde(rename = "cr")]
    pub cr_rate: f64,
    #[serde(rename = "n")]
    pub n_trials: usize,
}

impl TwoIfcRecord {
    pub fn accuracy(&self) -> f64 {
        let first = self.n_trials.div_ceil(2) as f64;
        let second = (self.n_trials / 2) as f64;
        (self.hit_rate * first + self.cr_rate * second) / self.n_trials as f64
    }

    pub fn observed_dprime(&self) -> f64 {
        dprime_from_rates(self.hit_rate, self.cr_rate, self.n_trials).dprime
    }
}

pub fn simulate_2ifc(params: &VisibilityParams, loc: Vec2, duration_ms: f64, n_trials: usize, seed: u64) -> TwoIfcRecord {
    simulate_2ifc_with_criterion(params, loc, duration_ms, n_trials, seed, 0.0)
}

/// Ideal-observer 2IFC: the target interval yields `N(d', 1)`, the blank
/// interval `N(0, 1)`, and the observer answers "first" when the difference
/// exceeds `criterion` (0 is unbiased). Trials alternate target-first /
/// target-second so both rates are defined.
pub fn simulate_2ifc_with_criterion(
    params: &VisibilityParams,
    loc: Vec2,
    duration_ms: f64,
    n_trials: usize,
    seed: u64,
    criterion: f64,
) -> TwoIfcRecord {
    assert!(n_trials > 0, "n_trials must be positive");
    let d = params.dprime(loc, duration_ms);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hits, mut crs) = (0usize, 0usize);
    for t in 0..n_trials {
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        let target_first = t % 2 == 0;
        let (x1, x2) = if target_first { (d + e1, e2) } else { (e1, d + e2) };
        let says_first = x1 - x2 > criterion;
        if target_first && says_first {
            hits += 1;
        } else if !target_first && !says_first {
            crs += 1;
        }
    }
    let n_first = n_trials.div_ceil(2);
    let n_second = n_trials / 2;
    TwoIfcRecord {
        target_loc_deg: loc,
        duration_ms,
        hit_rate: hits as f64 / n_first as f64,
        cr_rate: if n_second > 0 { crs as f64 / n_second as f64 } else { 0.5 },
        n_trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visibility::normal_cdf;

    fn flat(d: f64) -> VisibilityParams {
        // p2 = p4 = 0 is outside the fitted domain but gives a constant map.
        let mut p = VisibilityParams::calibrated(1.0, 1.0, 1.0, 0.01, 0.0, 1.0);
        p.p1 *= d;
        p.p2 = 0.0;
        p
    }

    #[test]
    fn zero_dprime_is_chance() {
        let n = 100_000;
        let r = simulate_2ifc(&flat(0.0), Vec2::ZERO, 250.0, n, 3);
        let se = (0.25 / n as f64).sqrt();
        assert!((r.accuracy() - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn dprime_three_matches_closed_form() {
        let n = 100_000;
        let r = simulate_2ifc(&VisibilityParams::reference(), Vec2::ZERO, 250.0, n, 4);
        let p = normal_cdf(3.0 / std::f64::consts::SQRT_2);
        assert!((p - 0.98305).abs() < 1e-4);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r.accuracy() - p).abs() < 4.0 * se, "{} vs {p}", r.accuracy());
    }

    #[test]
    fn accuracy_monotone_in_dprime() {
        let mut prev = 0.0;
        for (i, d) in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0].into_iter().enumerate() {
            let acc = simulate_2ifc(&flat(d), Vec2::ZERO, 250.0, 100_000, 10 + i as u64).accuracy();
            assert!(acc >= prev - 0.005, "{acc} after {prev}");
            prev = acc;
        }
    }

    #[test]
    fn rate_inversion_recovers_dprime() {
        let n = 200_000;
        for (i, &x) in [0.5, 2.0, 4.0].iter().enumerate() {
            let p = VisibilityParams::reference();
            let loc = Vec2::new(x, 0.0);
            let truth = p.dprime(loc, 250.0);
            let r = simulate_2ifc(&p, loc, 250.0, n, 100 + i as u64);
            // Delta-method SE of the d' estimate.
            let pc = normal_cdf(truth / std::f64::consts::SQRT_2);
            let phi = (-0.5 * (truth * truth / 2.0)).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let se = (pc * (1.0 - pc) / (n as f64 / 2.0)).sqrt() / phi;
            assert!((r.observed_dprime() - truth).abs() < 3.0 * se, "{} vs {truth}", r.observed_dprime());
        }
    }

    #[test]
    fn json_keys() {
        let r = TwoIfcRecord { target_loc_deg: Vec2::new(1.0, 2.0), duration_ms: 250.0, hit_rate: 0.8, cr_rate: 0.7, n_trials: 40 };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"loc_deg":[1.0,2.0],"duration_ms":250.0,"hit":0.8,"cr":0.7,"n":40}"#);
    }
}

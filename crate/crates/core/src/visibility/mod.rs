//! Target visibility: the leaky-integration d' field over retinal location and
//! fixation duration, signal-detection helpers and psychometric fitting.

mod fit;
mod twoifc;
mod weibull;

pub use fit::{FitBounds, VisibilityFit, fit_visibility, fit_visibility_with};
pub use twoifc::{TwoIfcRecord, simulate_2ifc, simulate_2ifc_with_criterion};
pub use weibull::{WeibullFit, WeibullOptions, fit_weibull};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::geom::Vec2;

/// Fixation duration used by the search models.
pub const SEARCH_FIXATION_MS: f64 = 250.0;

/// Parameters of `a(x,y) = p1 exp(-p2 e)`, `k(x,y) = p3 exp(-p4 e)` with the
/// anisotropic eccentricity `e = sqrt(x^2 + p5 y^2)` (deg), and
/// `d' = a sqrt((1 - exp(-kT)) / (k (1 + exp(-kT))))` with `T` in ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
}

impl VisibilityParams {
    pub fn to_array(&self) -> [f64; 5] {
        [self.p1, self.p2, self.p3, self.p4, self.p5]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        Self { p1: p[0], p2: p[1], p3: p[2], p4: p[3], p5: p[4] }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn eccentricity(&self, loc: Vec2) -> f64 {
        (loc.x * loc.x + self.p5 * loc.y * loc.y).sqrt()
    }

    pub fn amplitude(&self, loc: Vec2) -> f64 {
        self.p1 * (-self.p2 * self.eccentricity(loc)).exp()
    }

    pub fn leak_rate(&self, loc: Vec2) -> f64 {
        self.p3 * (-self.p4 * self.eccentricity(loc)).exp()
    }

    /// d' of a target at retinal offset `loc` (deg) viewed for `duration_ms`.
    pub fn dprime(&self, loc: Vec2, duration_ms: f64) -> f64 {
        let a = self.amplitude(loc);
        let k = self.leak_rate(loc);
        // (1 - e^-x) / (1 + e^-x) = tanh(x/2), stable for small kT.
        a * ((0.5 * k * duration_ms).tanh() / k).sqrt()
    }

    /// Reference map: fixed temporal terms and anisotropy, with `p1`, `p2`
    /// solved so that d'(0,0; 250 ms) = 3 and d'(6 deg, 0; 250 ms) = 1.
    pub fn reference() -> Self {
        Self::calibrated(3.0, 6.0, 1.0, 0.05, 0.5, 1.5)
    }

    /// Solve `p1`, `p2` so that the foveal d' at 250 ms is `foveal` and the d'
    /// at horizontal eccentricity `ecc_deg` is `at_ecc`.
    pub fn calibrated(foveal: f64, ecc_deg: f64, at_ecc: f64, p3: f64, p4: f64, p5: f64) -> Self {
        let t = SEARCH_FIXATION_MS;
        let gain = |k: f64| ((0.5 * k * t).tanh() / k).sqrt();
        let p1 = foveal / gain(p3);
        let k_e = p3 * (-p4 * ecc_deg).exp();
        let p2 = -(at_ecc / (p1 * gain(k_e))).ln() / ecc_deg;
        Self { p1, p2, p3, p4, p5 }
    }
}

pub fn dprime(params: &VisibilityParams, loc_deg: Vec2, duration_ms: f64) -> f64 {
    params.dprime(loc_deg, duration_ms)
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Inverse standard normal CDF.
pub fn z_score(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateDprime {
    pub dprime: f64,
    /// A rate hit 0 or 1 and was pulled in to `1/(2N)` from the boundary.
    pub clamped: bool,
}

/// 2IFC d' from hit and correct-rejection rates:
/// `(z(hit) - z(1 - cr)) / sqrt(2)`, with both rates kept in
/// `[1/(2N), 1 - 1/(2N)]`.
pub fn dprime_from_rates(hit: f64, cr: f64, n_trials: usize) -> RateDprime {
    let eps = 1.0 / (2.0 * n_trials.max(1) as f64);
    let clamp = |p: f64| p.clamp(eps, 1.0 - eps);
    let (h, c) = (clamp(hit), clamp(cr));
    let clamped = h != hit || c != cr;
    RateDprime { dprime: (z_score(h) - z_score(1.0 - c)) / std::f64::consts::SQRT_2, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_map_calibration_points() {
        let p = VisibilityParams::reference();
        assert!(p.is_valid());
        assert!((p.dprime(Vec2::ZERO, 250.0) - 3.0).abs() < 1e-12);
        assert!((p.dprime(Vec2::new(6.0, 0.0), 250.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn long_duration_limit() {
        let p = VisibilityParams::reference();
        let loc = Vec2::new(2.0, 1.0);
        let limit = p.amplitude(loc) / p.leak_rate(loc).sqrt();
        assert!((p.dprime(loc, 1e7) - limit).abs() < 1e-12);
    }

    #[test]
    fn short_duration_series() {
        let p = VisibilityParams::reference();
        let loc = Vec2::new(-1.0, 3.0);
        let t: f64 = 1e-6;
        let series = p.amplitude(loc) * (t / 2.0).sqrt();
        let got = p.dprime(loc, t);
        assert!(((got - series) / series).abs() < 1e-9);
    }

    #[test]
    fn origin_terms_are_p1_and_p3() {
        let p = VisibilityParams::reference();
        assert_eq!(p.amplitude(Vec2::ZERO), p.p1);
        assert_eq!(p.leak_rate(Vec2::ZERO), p.p3);
    }

    #[test]
    fn mirror_symmetry_and_radial_decrease() {
        let p = VisibilityParams::reference();
        for &(x, y) in &[(1.0, 2.0), (3.5, -0.5), (0.2, 6.0)] {
            let d = p.dprime(Vec2::new(x, y), 250.0);
            assert_eq!(d, p.dprime(Vec2::new(-x, y), 250.0));
            assert_eq!(d, p.dprime(Vec2::new(x, -y), 250.0));
        }
        for angle in [0.0f64, 0.7, 1.6, 2.9] {
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let r = i as f64 * 0.25;
                let d = p.dprime(Vec2::new(r * angle.cos(), r * angle.sin()), 250.0);
                assert!(d <= prev && d >= 0.0);
                prev = d;
            }
        }
    }

    #[test]
    fn rate_examples() {
        assert!(dprime_from_rates(0.5, 0.5, 100).dprime.abs() < 1e-12);
        // 2 z(0.9) / sqrt 2, with z(0.9) = 1.2815515655446004.
        let d = dprime_from_rates(0.9, 0.9, 100).dprime;
        assert!((d - 1.812_387_604_873_646).abs() < 1e-9, "{d}");
        // z(0.99) / sqrt 2, with z(0.99) = 2.3263478740408408.
        let d = dprime_from_rates(0.99, 0.5, 1000).dprime;
        assert!((d - 1.644_976_357_133_187).abs() < 1e-9, "{d}");
    }

    #[test]
    fn degenerate_rates_are_clamped() {
        let r = dprime_from_rates(1.0, 1.0, 50);
        assert!(r.clamped);
        let expected = 2.0 * z_score(1.0 - 0.01) / std::f64::consts::SQRT_2;
        assert!((r.dprime - expected).abs() < 1e-9);
        assert!(!dprime_from_rates(0.7, 0.6, 50).clamped);
    }
}

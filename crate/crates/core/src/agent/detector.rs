use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::visibility::{SEARCH_FIXATION_MS, VisibilityParams};

/// Estimated-error threshold below which the target counts as found (25 px).
pub const DETECTION_THRESHOLD_DEG: f64 = 0.58;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutput {
    pub fix_loc_pred_deg: Vec2,
    pub target_rel_pred_deg: Vec2,
    pub err_est_deg: f64,
}

impl DetectorOutput {
    pub fn target_abs_pred(&self) -> Vec2 {
        self.fix_loc_pred_deg + self.target_rel_pred_deg
    }

    pub fn detected(&self) -> bool {
        self.err_est_deg < DETECTION_THRESHOLD_DEG
    }
}

/// What a detector may look at: the true target and its contrast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub target_deg: Vec2,
    pub contrast: f64,
}

pub trait Detector {
    fn detect(&self, scene: &Scene, fixation: Vec2, rng: &mut dyn RngCore) -> DetectorOutput;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDetectorConfig {
    pub visibility: VisibilityParams,
    pub criterion: f64,
    pub loc_noise_base_deg: f64,
    pub loc_noise_scale: f64,
    pub detect_err_range: (f64, f64),
    pub miss_err_range: (f64, f64),
    pub miss_loc_noise_deg: f64,
    pub fix_noise_deg: f64,
    /// Contrast at which the visibility map applies unscaled; d' scales
    /// linearly with `contrast / reference_contrast`.
    pub reference_contrast: f64,
}

impl Default for OracleDetectorConfig {
    fn default() -> Self {
        Self {
            visibility: VisibilityParams::reference(),
            criterion: 2.0,
            loc_noise_base_deg: 0.1,
            loc_noise_scale: 0.3,
            detect_err_range: (0.0, DETECTION_THRESHOLD_DEG),
            miss_err_range: (DETECTION_THRESHOLD_DEG, 3.0),
            miss_loc_noise_deg: 3.0,
            fix_noise_deg: 0.05,
            reference_contrast: 0.123,
        }
    }
}

impl OracleDetectorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.detect_err_range.0 <= self.detect_err_range.1
            && self.detect_err_range.1 <= self.miss_err_range.0
            && self.miss_err_range.0 <= self.miss_err_range.1
            && self.criterion.is_finite()
            && self.reference_contrast > 0.0;
        if ok { Ok(()) } else { Err(crate::Error::Config("oracle detector ranges must be ordered".into())) }
    }
}

/// Stand-in for a trained detector: detection is a signal-detection draw on the
/// d' of the target at its retinal offset.
#[derive(Clone, Debug, Default)]
pub struct OracleDetector {
    pub config: OracleDetectorConfig,
}

impl OracleDetector {
    pub fn new(config: OracleDetectorConfig) -> Self {
        Self { config }
    }

    pub fn dprime(&self, scene: &Scene, fixation: Vec2) -> f64 {
        let c = &self.config;
        c.visibility.dprime(scene.target_deg - fixation, SEARCH_FIXATION_MS) * scene.contrast / c.reference_contrast
    }
}

fn gauss2(rng: &mut dyn RngCore, sd: f64) -> Vec2 {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    Vec2::new(x * sd, y * sd)
}

fn uniform(rng: &mut dyn RngCore, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

impl Detector for OracleDetector {
    fn detect(&self, scene: &Scene, fixation: Vec2, rng: &mut dyn RngCore) -> DetectorOutput {
        let c = &self.config;
        let d = self.dprime(scene, fixation);
        let z: f64 = StandardNormal.sample(rng);
        let truth = scene.target_deg - fixation;
        let (err, rel) = if d + z > c.criterion {
            let sd = c.loc_noise_base_deg + c.loc_noise_scale / d.max(1.0);
            (uniform(rng, c.detect_err_range), truth + gauss2(rng, sd))
        } else {
            (uniform(rng, c.miss_err_range), truth + gauss2(rng, c.miss_loc_noise_deg))
        };
        DetectorOutput { fix_loc_pred_deg: fixation + gauss2(rng, c.fix_noise_deg), target_rel_pred_deg: rel, err_est_deg: err }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visibility::normal_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rate(det: &OracleDetector, scene: Scene, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).filter(|_| det.detect(&scene, Vec2::ZERO, &mut rng).detected()).count() as f64 / n as f64
    }

    /// Pooled over ten independent streams of 10^5 draws each.
    fn pooled_rate(det: &OracleDetector, scene: Scene) -> (f64, usize) {
        let n = 100_000;
        let total: f64 = (0..10).map(|s| rate(det, scene, n, 100 + s)).sum();
        (total / 10.0, 10 * n)
    }

    #[test]
    fn foveal_detection_rate() {
        let det = OracleDetector::default();
        let scene = Scene { target_deg: Vec2::ZERO, contrast: det.config.reference_contrast };
        assert!((det.dprime(&scene, Vec2::ZERO) - 3.0).abs() < 1e-12);
        let (r, n) = pooled_rate(&det, scene);
        let p = normal_cdf(1.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r - p).abs() < 3.0 * se, "{r} vs {p}");
    }

    #[test]
    fn blind_detection_rate() {
        let det = OracleDetector::default();
        let scene = Scene { target_deg: Vec2::ZERO, contrast: 0.0 };
        let (r, n) = pooled_rate(&det, scene);
        let p = normal_cdf(-2.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r - p).abs() < 3.0 * se, "{r} vs {p}");
    }

    #[test]
    fn saturated_visibility_always_detects() {
        let det = OracleDetector::default();
        let scene = Scene { target_deg: Vec2::new(0.1, 0.0), contrast: 1e9 };
        assert_eq!(rate(&det, scene, 1000, 3), 1.0);
    }

    #[test]
    fn output_ranges() {
        let det = OracleDetector::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..2000 {
            let scene = Scene { target_deg: Vec2::new((i % 15) as f64 * 0.5 - 3.5, 1.0), contrast: 0.123 };
            let o = det.detect(&scene, Vec2::ZERO, &mut rng);
            assert!(o.err_est_deg >= 0.0 && o.err_est_deg < 3.0);
            assert!(o.fix_loc_pred_deg.is_finite() && o.target_rel_pred_deg.is_finite());
        }
    }
}

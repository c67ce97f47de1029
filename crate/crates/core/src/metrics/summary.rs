use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::trial::TrialRecord;

/// Side of a fixation-density cell (deg).
pub const DENSITY_CELL_DEG: f64 = 0.5;
/// Extent of the density map: the search disk diameter (deg).
pub const DENSITY_SPAN_DEG: f64 = 15.0;
pub const AMPLITUDE_BIN_DEG: f64 = 0.5;
pub const ECCENTRICITY_BIN_DEG: f64 = 1.0;

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width: f64) -> Self {
        let mut counts = Vec::new();
        for &v in values.iter().filter(|v| v.is_finite() && **v >= 0.0) {
            let i = (v / bin_width) as usize;
            if counts.len() <= i {
                counts.resize(i + 1, 0);
            }
            counts[i] += 1;
        }
        Self { bin_width, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Fixation counts on a square grid of `DENSITY_CELL_DEG` cells centred on
/// the image; row 0 is the top (largest y).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationDensity {
    pub cell_deg: f64,
    pub cells: usize,
    pub counts: Vec<u64>,
    /// Fixations outside the grid.
    pub outside: u64,
}

impl FixationDensity {
    pub fn build(points: impl IntoIterator<Item = Vec2>) -> Self {
        let cells = (DENSITY_SPAN_DEG / DENSITY_CELL_DEG).round() as usize;
        let half = DENSITY_SPAN_DEG / 2.0;
        let mut d = Self { cell_deg: DENSITY_CELL_DEG, cells, counts: vec![0; cells * cells], outside: 0 };
        for p in points {
            let col = ((p.x + half) / DENSITY_CELL_DEG).floor();
            let row = ((half - p.y) / DENSITY_CELL_DEG).floor();
            if col < 0.0 || row < 0.0 || col >= cells as f64 || row >= cells as f64 {
                d.outside += 1;
            } else {
                d.counts[row as usize * cells + col as usize] += 1;
            }
        }
        d
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.cells, self.cells), |(r, c)| self.counts[r * self.cells + c] as f64)
    }
}

/// Fixations per deg^2 within the ring `r0 <= |p| < r1`.
pub fn ring_density(points: &[Vec2], r0: f64, r1: f64) -> f64 {
    let n = points.iter().filter(|p| (r0..r1).contains(&p.norm())).count();
    n as f64 / (std::f64::consts::PI * (r1 * r1 - r0 * r0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EccentricityBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub trials: usize,
    pub median_fixations: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub trials: usize,
    pub correct: usize,
    pub percent_correct: f64,
    /// Over correct trials only; absent when none were correct.
    pub median_fixations: Option<f64>,
    pub mean_fixations: Option<f64>,
    pub no_correct_trials: bool,
    pub median_saccade_deg: Option<f64>,
    pub saccade_histogram: Histogram,
    /// Every fixation after the imposed first one.
    pub density: FixationDensity,
    pub eccentricity_curve: Vec<EccentricityBin>,
}

/// Search statistics in the layout of a results table: accuracy over all
/// trials, fixation numbers over correct trials.
pub fn summarize(trials: &[TrialRecord]) -> Result<SearchSummary> {
    if trials.is_empty() {
        return Err(Error::Empty("summary needs at least one trial"));
    }
    let correct: Vec<&TrialRecord> = trials.iter().filter(|t| t.outcome.is_correct()).collect();
    let fix: Vec<f64> = correct.iter().map(|t| t.fixation_count() as f64).collect();
    let amps: Vec<f64> = trials.iter().flat_map(|t| t.saccade_amplitudes()).collect();
    let density = FixationDensity::build(trials.iter().flat_map(|t| t.fixations_deg.iter().skip(1).copied()));
    let max_ecc = correct.iter().map(|t| t.target_deg.norm()).fold(0.0, f64::max);
    let n_bins = (max_ecc / ECCENTRICITY_BIN_DEG).floor() as usize + 1;
    let eccentricity_curve = if correct.is_empty() {
        Vec::new()
    } else {
        (0..n_bins)
            .map(|b| {
                let (lo, hi) = (b as f64 * ECCENTRICITY_BIN_DEG, (b + 1) as f64 * ECCENTRICITY_BIN_DEG);
                let v: Vec<f64> = correct.iter().filter(|t| (lo..hi).contains(&t.target_deg.norm())).map(|t| t.fixation_count() as f64).collect();
                EccentricityBin { lo_deg: lo, hi_deg: hi, trials: v.len(), median_fixations: median(&v) }
            })
            .collect()
    };
    Ok(SearchSummary {
        trials: trials.len(),
        correct: correct.len(),
        percent_correct: 100.0 * correct.len() as f64 / trials.len() as f64,
        median_fixations: median(&fix),
        mean_fixations: (!fix.is_empty()).then(|| fix.iter().sum::<f64>() / fix.len() as f64),
        no_correct_trials: correct.is_empty(),
        median_saccade_deg: median(&amps),
        saccade_histogram: Histogram::build(&amps, AMPLITUDE_BIN_DEG),
        density,
        eccentricity_curve,
    })
}

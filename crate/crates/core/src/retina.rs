//! Modified Foveal Cartesian Geometry: a fixation-centred resampling that
//! copies a central block at native resolution and samples concentric square
//! rings of geometrically growing half-width in the periphery.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::stimulus::SearchImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcgConfig {
    pub i_fovea: usize,
    pub i_max: usize,
    /// Half-width (source px) of the outermost ring.
    pub r_max: f64,
    pub fill_value: f64,
    pub interpolation: Interpolation,
}

impl Default for FcgConfig {
    fn default() -> Self {
        Self { i_fovea: 8, i_max: 112, r_max: 651.0, fill_value: 0.5, interpolation: Interpolation::Bilinear }
    }
}

impl FcgConfig {
    pub fn output_side(&self) -> usize {
        2 * self.i_max
    }

    fn validate(&self) -> Result<()> {
        if self.i_fovea == 0 || self.i_fovea >= self.i_max {
            return Err(Error::Config(format!(
                "need 0 < i_fovea < i_max, got {} and {}",
                self.i_fovea, self.i_max
            )));
        }
        if !self.r_max.is_finite() {
            return Err(Error::Config("r_max must be finite".into()));
        }
        Ok(())
    }
}

/// Number of output pixels on ring `i` (and of samples taken on it).
pub const fn ring_pixel_count(i: usize) -> usize {
    8 * i - 4
}

/// Solved ring-radius law `r(i) = i` (fovea), `a^(i+b) + c` (periphery).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcgSolution {
    pub config: FcgConfig,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `ring_radii[i - 1] = r(i)` for `i = 1..=i_max`.
    pub ring_radii: Vec<f64>,
}

impl FcgSolution {
    pub fn radius(&self, i: usize) -> f64 {
        if i <= self.config.i_fovea {
            i as f64
        } else {
            (((i as f64) + self.b) * self.a.ln()).exp() + self.c
        }
    }

    /// Residuals of continuity, slope matching and outer-radius constraints.
    pub fn residuals(&self) -> [f64; 3] {
        let ln_a = self.a.ln();
        let pf = ((self.config.i_fovea as f64 + self.b) * ln_a).exp();
        let pm = ((self.config.i_max as f64 + self.b) * ln_a).exp();
        [
            pf + self.c - self.config.i_fovea as f64,
            pf * ln_a - 1.0,
            pm + self.c - self.config.r_max,
        ]
    }

    /// Source offsets `(dx, drow)` from the sampling centre for every output
    /// pixel, in output row-major order.
    pub fn sample_offsets(&self) -> Array2<(f64, f64)> {
        let n = self.config.i_max;
        let side = 2 * n;
        let mut out = Array2::from_elem((side, side), (0.0, 0.0));
        for i in 1..=n {
            let rho = self.radius(i) - 0.5;
            let count = ring_pixel_count(i);
            let step = 8.0 * rho / count as f64;
            let lo = n - i;
            let hi = n + i - 1;
            for (k, (row, col)) in ring_output_coords(lo, hi).enumerate() {
                let s = k as f64 * step;
                out[[row, col]] = perimeter_point(rho, s);
            }
        }
        out
    }
}

/// Output pixels of the square ring spanning `lo..=hi`, clockwise from the
/// top-left corner.
fn ring_output_coords(lo: usize, hi: usize) -> impl Iterator<Item = (usize, usize)> {
    let top = (lo..=hi).map(move |c| (lo, c));
    let right = (lo + 1..=hi).map(move |r| (r, hi));
    let bottom = (lo..hi).rev().map(move |c| (hi, c));
    let left = (lo + 1..hi).rev().map(move |r| (r, lo));
    top.chain(right).chain(bottom).chain(left)
}

/// Point at arc length `s` along the square of half-width `rho`, starting at
/// the top-left corner and moving clockwise (rows grow downwards).
fn perimeter_point(rho: f64, s: f64) -> (f64, f64) {
    let side = 2.0 * rho;
    if s < side {
        (-rho + s, -rho)
    } else if s < 2.0 * side {
        (rho, -rho + (s - side))
    } else if s < 3.0 * side {
        (rho - (s - 2.0 * side), rho)
    } else {
        (-rho, rho - (s - 3.0 * side))
    }
}

pub fn solve_fcg(config: &FcgConfig) -> Result<FcgSolution> {
    config.validate()?;
    let i_f = config.i_fovea as f64;
    let n = (config.i_max - config.i_fovea) as f64;
    let target = config.r_max - i_f;
    // Eliminating b and c leaves (a^n - 1) / ln a = r_max - i_fovea, increasing in a > 1.
    let h = |a: f64| {
        let l = a.ln();
        (n * l).exp_m1() / l - target
    };
    let mut lo = 1.0 + 1e-12;
    if h(lo) >= 0.0 {
        return Err(Error::NoBracket(format!(
            "r_max = {} does not exceed i_max = {}; rings cannot grow",
            config.r_max, config.i_max
        )));
    }
    let mut hi = 2.0;
    let mut tries = 0;
    while h(hi) <= 0.0 {
        hi = 1.0 + 2.0 * (hi - 1.0);
        tries += 1;
        if tries > 60 || !hi.is_finite() {
            return Err(Error::NoBracket("outer radius unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 { lo = mid } else { hi = mid }
    }
    let a = 0.5 * (lo + hi);
    let ln_a = a.ln();
    let c = i_f - 1.0 / ln_a;
    let b = (1.0 / ln_a).ln() / ln_a - i_f;
    let mut sol = FcgSolution { config: *config, a, b, c, ring_radii: Vec::new() };
    sol.ring_radii = (1..=config.i_max).map(|i| sol.radius(i)).collect();
    Ok(sol)
}

#[derive(Clone, Debug)]
pub struct RetinalImage {
    pub pixels: Array2<f64>,
    pub fixation_deg: Vec2,
    pub source_seed: u64,
}

/// Precomputed transform: the solved ring law plus its sampling table.
#[derive(Clone, Debug)]
pub struct Retina {
    pub solution: FcgSolution,
    offsets: Array2<(f64, f64)>,
}

impl Retina {
    pub fn new(config: &FcgConfig) -> Result<Self> {
        let solution = solve_fcg(config)?;
        let offsets = solution.sample_offsets();
        Ok(Self { solution, offsets })
    }

    pub fn offsets(&self) -> &Array2<(f64, f64)> {
        &self.offsets
    }

    /// Sampling centre in source pixel coordinates: the pixel corner nearest
    /// the fixation, so that foveal rings land on pixel centres.
    pub fn sampling_center(col: f64, row: f64) -> (f64, f64) {
        ((col - 0.5).round() + 0.5, (row - 0.5).round() + 0.5)
    }

    pub fn transform(&self, image: &SearchImage, fixation_deg: Vec2) -> RetinalImage {
        let (col, row) = image.deg_to_px(fixation_deg);
        RetinalImage {
            pixels: self.transform_pixels(&image.pixels, col, row),
            fixation_deg,
            source_seed: image.seed,
        }
    }

    /// Transform a raw image given the fixation in fractional pixel coordinates.
    pub fn transform_pixels(&self, src: &Array2<f64>, fix_col: f64, fix_row: f64) -> Array2<f64> {
        let cfg = &self.solution.config;
        let (cc, cr) = Self::sampling_center(fix_col, fix_row);
        let n = cfg.i_max;
        let fovea_lo = n - cfg.i_fovea;
        let fovea_hi = n + cfg.i_fovea;
        Array2::from_shape_fn(self.offsets.dim(), |(r, c)| {
            let (dx, dr) = self.offsets[[r, c]];
            let (x, y) = (cc + dx, cr + dr);
            let in_fovea = (fovea_lo..fovea_hi).contains(&r) && (fovea_lo..fovea_hi).contains(&c);
            if in_fovea || cfg.interpolation == Interpolation::Nearest {
                sample_nearest(src, x, y, cfg.fill_value)
            } else {
                sample_bilinear(src, x, y, cfg.fill_value)
            }
        })
    }
}

fn pixel_or_fill(src: &Array2<f64>, col: isize, row: isize, fill: f64) -> f64 {
    let (rows, cols) = src.dim();
    if row < 0 || col < 0 || row as usize >= rows || col as usize >= cols {
        fill
    } else {
        src[[row as usize, col as usize]]
    }
}

fn sample_nearest(src: &Array2<f64>, x: f64, y: f64, fill: f64) -> f64 {
    pixel_or_fill(src, x.round() as isize, y.round() as isize, fill)
}

fn sample_bilinear(src: &Array2<f64>, x: f64, y: f64, fill: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (c0, r0) = (x0 as isize, y0 as isize);
    let p00 = pixel_or_fill(src, c0, r0, fill);
    let p01 = pixel_or_fill(src, c0 + 1, r0, fill);
    let p10 = pixel_or_fill(src, c0, r0 + 1, fill);
    let p11 = pixel_or_fill(src, c0 + 1, r0 + 1, fill);
    let top = p00 + fx * (p01 - p00);
    let bot = p10 + fx * (p11 - p10);
    top + fy * (bot - top)
}

pub fn retinal_transform(image: &SearchImage, fixation_deg: Vec2, retina: &Retina) -> RetinalImage {
    retina.transform(image, fixation_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_solution_matches_reduced_equation() {
        let sol = solve_fcg(&FcgConfig::default()).unwrap();
        assert!(sol.a > 1.028 && sol.a < 1.031, "a = {}", sol.a);
        for r in sol.residuals() {
            assert!(r.abs() <= 1e-9, "residual {r}");
        }
        assert_eq!(sol.radius(8), 8.0);
        let step = sol.radius(9) - sol.radius(8);
        assert!(step > 1.0 && step < 1.1, "step {step}");
        assert!((sol.radius(112) - 651.0).abs() < 1e-9);
    }

    #[test]
    fn independent_bisection_oracle_agrees() {
        // Bisect (a^104 - 1)/ln a = 643 directly with powf.
        let f = |a: f64| (a.powf(104.0) - 1.0) / a.ln() - 643.0;
        let (mut lo, mut hi) = (1.0001, 1.1);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 { lo = m } else { hi = m }
        }
        let sol = solve_fcg(&FcgConfig::default()).unwrap();
        assert!((sol.a - lo).abs() < 1e-12);
    }

    #[test]
    fn radii_strictly_increasing() {
        let sol = solve_fcg(&FcgConfig::default()).unwrap();
        assert!(sol.ring_radii.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unreachable_outer_radius_is_config_error() {
        let cfg = FcgConfig { r_max: 100.0, ..Default::default() };
        assert!(matches!(solve_fcg(&cfg), Err(Error::NoBracket(_))));
        let cfg = FcgConfig { i_fovea: 112, ..Default::default() };
        assert!(matches!(solve_fcg(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn ring_counts_tile_the_output() {
        for n in [2usize, 9, 112, 300] {
            let total: usize = (1..=n).map(ring_pixel_count).sum();
            assert_eq!(total, (2 * n) * (2 * n));
        }
        let mut seen = Array2::from_elem((20, 20), 0u8);
        for i in 1..=10 {
            let coords: Vec<_> = ring_output_coords(10 - i, 10 + i - 1).collect();
            assert_eq!(coords.len(), ring_pixel_count(i));
            for (r, c) in coords {
                seen[[r, c]] += 1;
            }
        }
        assert!(seen.iter().all(|&v| v == 1));
    }

    #[test]
    fn constant_image_maps_to_constant() {
        let retina = Retina::new(&FcgConfig { fill_value: 0.3, ..Default::default() }).unwrap();
        let src = Array2::from_elem((651, 651), 0.3);
        let out = retina.transform_pixels(&src, 100.2, 500.7);
        assert!(out.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn fovea_is_bit_exact_copy() {
        let retina = Retina::new(&FcgConfig::default()).unwrap();
        let src = Array2::from_shape_fn((651, 651), |(r, c)| ((r * 7919 + c * 104729) % 1000) as f64 / 1000.0);
        let (fc, fr) = (300.3, 280.9);
        let out = retina.transform_pixels(&src, fc, fr);
        let (cc, cr) = Retina::sampling_center(fc, fr);
        let (c0, r0) = ((cc - 8.5) as usize + 1, (cr - 8.5) as usize + 1);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(out[[104 + r, 104 + c]].to_bits(), src[[r0 + r, c0 + c]].to_bits());
            }
        }
    }

    #[test]
    fn sampling_eccentricity_grows_with_ring() {
        let sol = solve_fcg(&FcgConfig::default()).unwrap();
        let offs = sol.sample_offsets();
        let mut prev = 0.0;
        for i in 1..=112 {
            let (dx, dr) = offs[[112 - i, 112 - i]];
            let ecc = dx.abs().max(dr.abs());
            assert!(ecc >= prev);
            prev = ecc;
        }
    }

    proptest! {
        #[test]
        fn integer_translation_equivariance(dx in -40i32..40, dy in -40i32..40, fc in 200.0f64..400.0, fr in 200.0f64..400.0) {
            let cfg = FcgConfig { i_max: 24, i_fovea: 4, r_max: 160.0, ..Default::default() };
            let retina = Retina::new(&cfg).unwrap();
            let big = Array2::from_shape_fn((700, 700), |(r, c)| (((r as f64) * 0.37).sin() + ((c as f64) * 0.23).cos()) * 0.25 + 0.5);
            let shifted = Array2::from_shape_fn((700, 700), |(r, c)| {
                let (sr, sc) = (r as i64 - dy as i64, c as i64 - dx as i64);
                if sr < 0 || sc < 0 || sr >= 700 || sc >= 700 { 0.5 } else { big[[sr as usize, sc as usize]] }
            });
            let a = retina.transform_pixels(&big, fc, fr);
            let b = retina.transform_pixels(&shifted, fc + dx as f64, fr + dy as f64);
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

//! Search stimuli: 1/f noise disk with an additively embedded Gabor target.

mod gabor;
mod geometry;
mod noise;
pub mod spectrum;

pub use gabor::{GaborPatch, GaborSpec, render_gabor};
pub use geometry::{SEARCH_IMAGE_SPAN_DEG, ScreenGeometry};
pub use noise::{CLAMP_WARN_FRACTION, NoiseSpec, generate_noise, synthesize_canvas};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// `true` for pixels whose centre lies within `diameter/2` of the image centre.
pub fn disk_mask(diameter: usize) -> Array2<bool> {
    let c = (diameter as f64 - 1.0) / 2.0;
    let r = diameter as f64 / 2.0;
    Array2::from_shape_fn((diameter, diameter), |(row, col)| {
        (row as f64 - c).hypot(col as f64 - c) <= r
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedTarget {
    /// Pixel-centre location the patch was centred on.
    pub location_deg: Vec2,
    pub contrast: f64,
}

#[derive(Clone, Debug)]
pub struct SearchImage {
    /// Row-major luminance in [0, 1]; row 0 is the top of the image.
    pub pixels: Array2<f64>,
    pub mean_luminance: f64,
    pub seed: u64,
    pub target: Option<EmbeddedTarget>,
    pub clamped_pixels: usize,
    pub clamp_warning: bool,
}

impl SearchImage {
    pub fn diameter_px(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn px_per_deg(&self) -> f64 {
        self.diameter_px() as f64 / SEARCH_IMAGE_SPAN_DEG
    }

    pub fn center_px(&self) -> f64 {
        (self.diameter_px() as f64 - 1.0) / 2.0
    }

    pub fn disk_radius_px(&self) -> f64 {
        self.diameter_px() as f64 / 2.0
    }

    /// Image-centred degrees to fractional (column, row) pixel coordinates.
    pub fn deg_to_px(&self, v: Vec2) -> (f64, f64) {
        let ppd = self.px_per_deg();
        let c = self.center_px();
        (c + v.x * ppd, c - v.y * ppd)
    }

    pub fn px_to_deg(&self, col: f64, row: f64) -> Vec2 {
        let ppd = self.px_per_deg();
        let c = self.center_px();
        Vec2::new((col - c) / ppd, (c - row) / ppd)
    }
}

/// Add `mean_luminance * g` around the pixel nearest `loc_deg`, clamping to [0, 1].
pub fn embed_target(noise: &SearchImage, gabor: &GaborSpec, loc_deg: Vec2) -> Result<SearchImage> {
    let (col, row) = noise.deg_to_px(loc_deg);
    let (col, row) = (col.round(), row.round());
    let c = noise.center_px();
    let dist = (col - c).hypot(row - c);
    if !loc_deg.is_finite() || dist + gabor.radius_px() > noise.disk_radius_px() {
        return Err(Error::TargetOutsideDisk { x: loc_deg.x, y: loc_deg.y });
    }
    let ppd = noise.px_per_deg();
    let patch = render_gabor(gabor, ppd);
    let half = patch.half_size as isize;
    let mut out = noise.clone();
    let mut clamped = 0;
    let d = noise.diameter_px() as isize;
    for ((pr, pc), &g) in patch.values.indexed_iter() {
        let r = row as isize + pr as isize - half;
        let cc = col as isize + pc as isize - half;
        if g == 0.0 || r < 0 || cc < 0 || r >= d || cc >= d {
            continue;
        }
        let px = &mut out.pixels[[r as usize, cc as usize]];
        let v = *px + noise.mean_luminance * g;
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
        }
        *px = v.clamp(0.0, 1.0);
    }
    out.clamped_pixels += clamped;
    out.target = Some(EmbeddedTarget {
        location_deg: noise.px_to_deg(col, row),
        contrast: gabor.contrast,
    });
    Ok(out)
}

/// Largest eccentricity (deg) at which a target of `gabor` always fits after
/// snapping to the pixel grid.
pub fn max_target_eccentricity_deg(diameter_px: usize, gabor: &GaborSpec) -> f64 {
    let ppd = diameter_px as f64 / SEARCH_IMAGE_SPAN_DEG;
    (diameter_px as f64 / 2.0 - gabor.radius_px() - 1.0) / ppd
}

/// Uniform sample inside a disk of `radius` (area-uniform).
pub fn sample_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    Vec2::new(r * a.cos(), r * a.sin())
}

pub fn sample_target_location<R: Rng + ?Sized>(rng: &mut R, diameter_px: usize, gabor: &GaborSpec) -> Vec2 {
    sample_in_disk(rng, max_target_eccentricity_deg(diameter_px, gabor))
}

/// Noise plus target in one call.
pub fn build_search_image(noise: &NoiseSpec, gabor: &GaborSpec, loc_deg: Vec2) -> Result<SearchImage> {
    let bg = generate_noise(noise)?;
    embed_target(&bg, gabor, loc_deg)
}

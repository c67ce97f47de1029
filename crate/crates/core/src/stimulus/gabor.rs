use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gabor target. Orientation is the stripe direction, measured
/// counter-clockwise from vertical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaborSpec {
    pub diameter_px: f64,
    pub spatial_freq_cpd: f64,
    pub orientation_deg: f64,
    pub contrast: f64,
    pub phase_rad: f64,
}

impl Default for GaborSpec {
    fn default() -> Self {
        Self {
            diameter_px: 12.0,
            spatial_freq_cpd: 6.0,
            orientation_deg: 45.0,
            contrast: 0.15,
            phase_rad: 0.0,
        }
    }
}

impl GaborSpec {
    pub fn radius_px(&self) -> f64 {
        self.diameter_px / 2.0
    }

    /// Symmetric raised-cosine window, 1 at the centre and 0 from `radius_px` on.
    pub fn window(&self, r: f64) -> f64 {
        let radius = self.radius_px();
        if r >= radius {
            0.0
        } else {
            0.5 * (1.0 + (PI * r / radius).cos())
        }
    }

    /// Patch value at pixel offset (`dx` right, `dy` up) from the centre.
    pub fn value_at(&self, dx: f64, dy: f64, px_per_deg: f64) -> f64 {
        let cycles_per_px = self.spatial_freq_cpd / px_per_deg;
        // Vertical stripes modulate along x; rotate that axis with the stripes.
        let theta = self.orientation_deg.to_radians();
        let u = dx * theta.cos() + dy * theta.sin();
        self.contrast
            * (2.0 * PI * cycles_per_px * u + self.phase_rad).cos()
            * self.window(dx.hypot(dy))
    }
}

/// Rendered target patch on an odd pixel grid centred on offset (0, 0).
#[derive(Clone, Debug, PartialEq)]
pub struct GaborPatch {
    /// Row-major; row 0 is the top (largest `dy`).
    pub values: Array2<f64>,
    pub half_size: usize,
}

impl GaborPatch {
    pub fn center(&self) -> f64 {
        self.values[[self.half_size, self.half_size]]
    }
}

pub fn render_gabor(spec: &GaborSpec, px_per_deg: f64) -> GaborPatch {
    let half = spec.radius_px().ceil() as usize;
    let side = 2 * half + 1;
    let values = Array2::from_shape_fn((side, side), |(r, c)| {
        let dx = c as f64 - half as f64;
        let dy = half as f64 - r as f64;
        spec.value_at(dx, dy, px_per_deg)
    });
    GaborPatch { values, half_size: half }
}

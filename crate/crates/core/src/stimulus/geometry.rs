use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Angular span of the search image; the pixel diameter of the image is the
/// rounded number of screen pixels it subtends.
pub const SEARCH_IMAGE_SPAN_DEG: f64 = 15.0;

/// Physical display setup used to convert visual angle to screen pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
    pub width_cm: f64,
    pub height_cm: f64,
    pub viewing_distance_cm: f64,
}

impl Default for ScreenGeometry {
    fn default() -> Self {
        Self {
            width_px: 1920,
            height_px: 1080,
            width_cm: 54.3744,
            height_cm: 30.2616,
            viewing_distance_cm: 70.0,
        }
    }
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.width_px > 0
            && self.height_px > 0
            && self.width_cm > 0.0
            && self.height_cm > 0.0
            && self.viewing_distance_cm > 0.0;
        if !ok {
            return Err(Error::Config("screen geometry must be strictly positive".into()));
        }
        let ppd = self.px_per_deg();
        if !(ppd.is_finite() && ppd > 0.0) {
            return Err(Error::Config(format!("pixels per degree is {ppd}")));
        }
        Ok(())
    }

    pub fn px_per_cm(&self) -> f64 {
        self.width_px as f64 / self.width_cm
    }

    /// Screen pixels subtended by a centred visual angle of `span_deg`.
    pub fn span_px(&self, span_deg: f64) -> f64 {
        let half = (span_deg / 2.0).to_radians();
        2.0 * self.viewing_distance_cm * half.tan() * self.px_per_cm()
    }

    /// Diameter of the search image in whole pixels (651 for the default screen).
    pub fn image_diameter_px(&self) -> usize {
        self.span_px(SEARCH_IMAGE_SPAN_DEG).round() as usize
    }

    /// Linear conversion factor anchored on the integer image diameter, so
    /// that the full 15 deg span maps to exactly `image_diameter_px` pixels.
    pub fn px_per_deg(&self) -> f64 {
        self.image_diameter_px() as f64 / SEARCH_IMAGE_SPAN_DEG
    }

    pub fn degrees_to_pixels(&self, v: Vec2) -> Vec2 {
        v * self.px_per_deg()
    }

    pub fn pixels_to_degrees(&self, v: Vec2) -> Vec2 {
        v * (1.0 / self.px_per_deg())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_screen_gives_651_px_image() {
        let g = ScreenGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.image_diameter_px(), 651);
        assert!((g.px_per_deg() - 43.4).abs() < 1e-12);
    }

    #[test]
    fn conversion_examples() {
        let g = ScreenGeometry::default();
        let p = g.degrees_to_pixels(Vec2::new(15.0, 0.0));
        assert!((p.x - 651.0).abs() < 1e-9 && p.y == 0.0);
        assert_eq!(g.degrees_to_pixels(Vec2::ZERO), Vec2::ZERO);
        let p = g.degrees_to_pixels(Vec2::new(1.0, 1.0));
        assert!((p.x - 651.0 / 15.0).abs() < 1e-12 && (p.y - 651.0 / 15.0).abs() < 1e-12);
        let back = g.pixels_to_degrees(g.degrees_to_pixels(Vec2::new(3.3, -2.1)));
        assert!((back.x - 3.3).abs() < 1e-12 && (back.y + 2.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_geometry() {
        let g = ScreenGeometry { viewing_distance_cm: 0.0, ..Default::default() };
        assert!(g.validate().is_err());
    }
}

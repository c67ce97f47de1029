//! 1/f ("naturalistic") noise synthesis in the frequency domain.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{SearchImage, disk_mask};
use crate::error::{Error, Result};
use crate::fft::ifft2_in_place;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub diameter_px: usize,
    pub rms_contrast: f64,
    pub mean_luminance: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { diameter_px: 651, rms_contrast: 0.2, mean_luminance: 0.5, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.diameter_px < 2 {
            return Err(Error::Config("noise diameter must be at least 2 px".into()));
        }
        if !(0.0..=0.5).contains(&self.rms_contrast) {
            return Err(Error::Config(format!("rms contrast {} outside [0, 0.5]", self.rms_contrast)));
        }
        if !(0.0..=1.0).contains(&self.mean_luminance) {
            return Err(Error::Config(format!("mean luminance {} outside [0, 1]", self.mean_luminance)));
        }
        Ok(())
    }

    /// Side of the square synthesis canvas.
    pub fn canvas_side(&self) -> usize {
        self.diameter_px.next_power_of_two()
    }
}

/// Fraction of disk pixels that may clamp before the image is flagged.
pub const CLAMP_WARN_FRACTION: f64 = 0.01;

/// Raw zero-mean 1/f field on the full synthesis canvas.
///
/// Amplitude is `1/f` with `f` in cycles per canvas; phases are uniform and
/// the spectrum is Hermitian so the inverse transform is real.
pub fn synthesize_canvas(side: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = side;
    let freq = |k: usize| -> f64 {
        if k <= n / 2 { k as f64 } else { k as f64 - n as f64 }
    };
    let mut spec = vec![Complex64::new(0.0, 0.0); n * n];
    for ky in 0..n {
        for kx in 0..n {
            let idx = ky * n + kx;
            let py = (n - ky) % n;
            let px = (n - kx) % n;
            let partner = py * n + px;
            if partner < idx {
                continue;
            }
            let f = freq(ky).hypot(freq(kx));
            if f == 0.0 {
                continue;
            }
            let amp = 1.0 / f;
            if partner == idx {
                // Nyquist / self-conjugate bins must be real.
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                spec[idx] = Complex64::new(sign * amp, 0.0);
            } else {
                let phase = rng.random::<f64>() * TAU;
                let z = Complex64::from_polar(amp, phase);
                spec[idx] = z;
                spec[partner] = z.conj();
            }
        }
    }
    ifft2_in_place(&mut spec, n);
    Array2::from_shape_fn((n, n), |(r, c)| spec[r * n + c].re)
}

/// Generate the background noise disk: exact mean and RMS contrast over the
/// disk interior, clamped to [0, 1], constant `mean_luminance` outside.
pub fn generate_noise(spec: &NoiseSpec) -> Result<SearchImage> {
    spec.validate()?;
    let d = spec.diameter_px;
    let mask = disk_mask(d);
    let mut pixels = Array2::from_elem((d, d), spec.mean_luminance);
    let mut clamped = 0usize;
    if spec.rms_contrast > 0.0 {
        let side = spec.canvas_side();
        let canvas = synthesize_canvas(side, spec.seed);
        let off = (side - d) / 2;
        let crop = canvas.slice(ndarray::s![off..off + d, off..off + d]);
        let (mut sum, mut count) = (0.0, 0usize);
        for (v, &inside) in crop.iter().zip(mask.iter()) {
            if inside {
                sum += v;
                count += 1;
            }
        }
        let m = sum / count as f64;
        let var = crop
            .iter()
            .zip(mask.iter())
            .filter(|(_, &inside)| inside)
            .map(|(v, _)| (v - m) * (v - m))
            .sum::<f64>()
            / count as f64;
        let sd = var.sqrt();
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::NonFinite("noise standard deviation"));
        }
        let gain = spec.mean_luminance * spec.rms_contrast / sd;
        for ((out, v), &inside) in pixels.iter_mut().zip(crop.iter()).zip(mask.iter()) {
            if inside {
                let x = spec.mean_luminance + gain * (v - m);
                if !(0.0..=1.0).contains(&x) {
                    clamped += 1;
                }
                *out = x.clamp(0.0, 1.0);
            }
        }
    }
    let disk_pixels = mask.iter().filter(|&&b| b).count();
    Ok(SearchImage {
        pixels,
        mean_luminance: spec.mean_luminance,
        seed: spec.seed,
        target: None,
        clamped_pixels: clamped,
        clamp_warning: clamped as f64 > CLAMP_WARN_FRACTION * disk_pixels as f64,
    })
}

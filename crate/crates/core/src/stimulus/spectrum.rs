//! Radial amplitude-spectrum analysis of generated images.

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use crate::fft::fft2_in_place;

/// Mean Fourier amplitude per integer radial frequency (cycles per window),
/// measured on the largest centred square inscribed in the noise disk with a
/// separable Hann taper. Index 0 is DC.
pub fn radial_amplitude(pixels: &Array2<f64>) -> Vec<f64> {
    let d = pixels.nrows();
    let side = ((d as f64) / std::f64::consts::SQRT_2).floor() as usize;
    let off = (d - side) / 2;
    let sq = pixels.slice(ndarray::s![off..off + side, off..off + side]);
    let mean = sq.mean().unwrap_or(0.0);
    let hann: Vec<f64> = (0..side)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (side as f64 - 1.0)).cos())
        .collect();
    let mut buf: Vec<Complex64> = sq
        .indexed_iter()
        .map(|((r, c), &v)| Complex64::new((v - mean) * hann[r] * hann[c], 0.0))
        .collect();
    fft2_in_place(&mut buf, side);
    let freq = |k: usize| if k <= side / 2 { k as f64 } else { k as f64 - side as f64 };
    let nbins = side / 2 + 1;
    let mut sum = vec![0.0; nbins];
    let mut cnt = vec![0usize; nbins];
    for r in 0..side {
        for c in 0..side {
            let b = freq(r).hypot(freq(c)).round() as usize;
            if b < nbins {
                sum[b] += buf[r * side + c].norm();
                cnt[b] += 1;
            }
        }
    }
    sum.iter().zip(&cnt).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect()
}

/// Least-squares slope of log amplitude against log frequency over bins
/// `2..=len/2` of a radial spectrum.
pub fn loglog_slope(radial: &[f64]) -> f64 {
    let hi = (radial.len() - 1) / 2;
    let pts: Vec<(f64, f64)> = (2..=hi)
        .filter(|&k| radial[k] > 0.0)
        .map(|k| ((k as f64).ln(), radial[k].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

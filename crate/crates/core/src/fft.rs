//! Thin 2-D helpers over `rustfft`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

fn transform_2d(data: &mut [Complex64], n: usize, fft: Arc<dyn Fft<f64>>) {
    assert_eq!(data.len(), n * n);
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Unnormalised forward 2-D DFT of a row-major `n x n` buffer.
pub fn fft2_in_place(data: &mut [Complex64], n: usize) {
    let fft = FftPlanner::new().plan_fft_forward(n);
    transform_2d(data, n, fft);
}

/// Inverse 2-D DFT, normalised by `1/n^2`.
pub fn ifft2_in_place(data: &mut [Complex64], n: usize) {
    let fft = FftPlanner::new().plan_fft_inverse(n);
    transform_2d(data, n, fft);
    let scale = 1.0 / (n * n) as f64;
    data.iter_mut().for_each(|z| *z *= scale);
}

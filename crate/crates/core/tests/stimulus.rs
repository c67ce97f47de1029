use proptest::prelude::*;
use vsearch_core::Vec2;
use vsearch_core::stimulus::spectrum::radial_amplitude;
use vsearch_core::stimulus::{GaborSpec, NoiseSpec, build_search_image, disk_mask, generate_noise, synthesize_canvas};

fn disk_stats(spec: &NoiseSpec) -> (f64, f64) {
    let img = generate_noise(spec).unwrap();
    let mask = disk_mask(spec.diameter_px);
    let v: Vec<f64> = img.pixels.iter().zip(mask.iter()).filter(|(_, m)| **m).map(|(p, _)| *p).collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    (m, sd)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn same_seed_same_image(seed in any::<u64>(), x in -4.0..4.0f64, y in -4.0..4.0f64, c in 0.0..0.5f64) {
        let noise = NoiseSpec { seed, diameter_px: 201, ..NoiseSpec::default() };
        let gabor = GaborSpec { contrast: c, ..GaborSpec::default() };
        let loc = Vec2::new(x.clamp(-2.0, 2.0), y.clamp(-2.0, 2.0));
        let a = build_search_image(&noise, &gabor, loc).unwrap();
        let b = build_search_image(&noise, &gabor, loc).unwrap();
        prop_assert!(a.pixels.iter().zip(b.pixels.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        prop_assert_eq!(a.target, b.target);
    }

    #[test]
    fn exterior_is_mean_luminance(seed in any::<u64>(), mean in 0.3..0.7f64) {
        let spec = NoiseSpec { seed, mean_luminance: mean, ..NoiseSpec::default() };
        let img = generate_noise(&spec).unwrap();
        let c = (spec.diameter_px as f64 - 1.0) / 2.0;
        for ((r, col), &p) in img.pixels.indexed_iter() {
            if ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt() > 325.5 {
                prop_assert_eq!(p, mean);
            }
        }
    }

    #[test]
    fn contrast_normalised_before_clamping(seed in any::<u64>()) {
        let spec = NoiseSpec { seed, ..NoiseSpec::default() };
        let img = generate_noise(&spec).unwrap();
        // Without clamping the normalisation must be exact.
        prop_assume!(img.clamped_pixels == 0);
        let (m, sd) = disk_stats(&spec);
        prop_assert!((sd / m - 0.2).abs() <= 1e-9, "contrast {}", sd / m);
    }
}

#[test]
fn ensemble_spectrum_falls_with_frequency() {
    let n = 16;
    let mut avg: Vec<f64> = Vec::new();
    for seed in 0..n {
        let img = generate_noise(&NoiseSpec { seed, ..NoiseSpec::default() }).unwrap();
        let r = radial_amplitude(&img.pixels);
        if avg.is_empty() {
            avg = vec![0.0; r.len()];
        }
        avg.iter_mut().zip(&r).for_each(|(a, v)| *a += v / n as f64);
    }
    // Adjacent high-frequency bins are within sampling noise of each other, so
    // compare half-octave bands from the first non-DC bin outward.
    let mut bands = Vec::new();
    let mut lo = 1usize;
    while lo < avg.len() {
        let hi = ((lo as f64 * 2f64.sqrt()).ceil() as usize).max(lo + 1).min(avg.len());
        bands.push(avg[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
        lo = hi;
    }
    assert!(bands.len() >= 8);
    for k in 1..bands.len() {
        assert!(bands[k] < bands[k - 1], "band {k}: {} >= {}", bands[k], bands[k - 1]);
    }
}

#[test]
fn canvas_is_zero_mean() {
    let c = synthesize_canvas(256, 9);
    assert!(c.iter().all(|v| v.is_finite()));
    let m = c.mean().unwrap();
    assert!(m.abs() < 1e-9 * c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0));
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsearch_core::elm::{ElmModel, Posterior, run_trials};
use vsearch_core::visibility::VisibilityParams;

proptest! {
    #[test]
    fn posterior_normalised_after_every_update(n in 2usize..300, seed in any::<u64>(), steps in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Posterior::uniform(n);
        for _ in 0..steps {
            let d2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..9.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
            p.update(&w, &d2).unwrap();
            let s: f64 = p.probabilities().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "sum {}", s);
            prop_assert!(p.probabilities().iter().all(|&q| (0.0..=1.0).contains(&q)));
        }
    }
}

#[test]
fn mean_entropy_does_not_rise() {
    let model = ElmModel::new(&VisibilityParams::reference(), 0.896).unwrap();
    let (trials, _) = run_trials(&model, 500, 5);
    let horizon = 15;
    // A finished trial keeps its final entropy.
    let mean: Vec<f64> = (0..horizon)
        .map(|k| trials.iter().map(|t| t.entropies[k.min(t.entropies.len() - 1)]).sum::<f64>() / trials.len() as f64)
        .collect();
    // Entries are taken after each fixation's update, so even the first is below the uniform prior.
    assert!(mean[0] < (400f64).ln());
    for k in 1..horizon {
        assert!(mean[k] <= mean[k - 1] + 1e-12, "entropy rose at {k}: {:?}", &mean[..=k]);
    }
}

#[test]
fn same_seed_threshold_and_map_repeat() {
    let model = ElmModel::new(&VisibilityParams::reference(), 0.9).unwrap();
    let (a, sa) = run_trials(&model, 40, 77);
    let (b, sb) = run_trials(&model, 40, 77);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let (c, _) = run_trials(&model, 40, 78);
    assert_ne!(a, c);
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsearch_core::snn::{IfLayer, IfNeurons, Linear, SpikingRnn, qcfs};

const T: usize = 4;

fn rate(layer: &mut IfLayer, inputs: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lambda = layer.neurons.lambda;
    let mut count = vec![0.0; layer.size()];
    let mut spikes = Vec::new();
    for x in inputs {
        let s = layer.step(x).unwrap();
        for (c, v) in count.iter_mut().zip(&s) {
            assert!(*v == 0.0 || *v == lambda, "spike value {v}");
            *c += v / lambda;
        }
        spikes.push(s);
    }
    (count.iter().map(|c| lambda * c / inputs.len() as f64).collect(), spikes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn single_layer_rate_is_qcfs(seed in any::<u64>(), n_in in 1usize..12, n_out in 1usize..12, lambda in 0.25..8.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lin = Linear::init(n_in, n_out, &mut rng);
        let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-3.0..3.0) * lambda).collect();
        let mut layer = IfLayer::new(lin.clone(), IfNeurons::with_lambda(lambda));
        prop_assert_eq!(layer.neurons.v_init, 0.5 * layer.neurons.threshold);
        let (r, _) = rate(&mut layer, &vec![x.clone(); T]);
        for (ri, z) in r.iter().zip(lin.forward(&x)) {
            prop_assert_eq!(*ri, qcfs(z, lambda, T));
        }
    }
}

#[test]
fn two_layer_deviation_within_lambda_over_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let lambda = rng.random_range(0.5..4.0);
        let l1 = Linear::init(16, 16, &mut rng);
        let l2 = Linear::init(16, 16, &mut rng);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0) * lambda).collect();
        let mut a = IfLayer::new(l1.clone(), IfNeurons::with_lambda(lambda));
        let mut b = IfLayer::new(l2.clone(), IfNeurons::with_lambda(lambda));
        let (_, s1) = rate(&mut a, &vec![x.clone(); T]);
        let (r2, _) = rate(&mut b, &s1);
        let h: Vec<f64> = l1.forward(&x).into_iter().map(|z| qcfs(z, lambda, T)).collect();
        let ann: Vec<f64> = l2.forward(&h).into_iter().map(|z| qcfs(z, lambda, T)).collect();
        let dev = r2.iter().zip(&ann).map(|(s, a)| (s - a).abs()).sum::<f64>() / 16.0;
        assert!(dev <= lambda / T as f64, "mean deviation {dev} > {}", lambda / T as f64);
        worst = worst.max(dev / lambda);
    }
    assert!(worst > 0.0, "second layer never deviated; the check is vacuous");
}

proptest! {
    #[test]
    fn rnn_spikes_bounded_and_stateless(seed in any::<u64>(), hidden in 1usize..24, lambda in 0.5..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rnn = SpikingRnn::init(2, hidden, IfNeurons::with_lambda(lambda), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..T).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let h: Vec<f64> = (0..hidden).map(|_| if rng.random::<bool>() { lambda } else { 0.0 }).collect();
        let a = rnn.fixation(&inputs, &h);
        let b = rnn.fixation(&inputs, &h);
        prop_assert_eq!(&a.spikes, &b.spikes);
        prop_assert_eq!(a.spikes.len(), T);
        for j in 0..hidden {
            let mut n = 0;
            for s in &a.spikes {
                prop_assert!(s[j] == 0.0 || s[j] == lambda);
                n += usize::from(s[j] != 0.0);
            }
            prop_assert!(n <= T);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::linear::{Linear, LinearGrad};

/// Linear decode of the time-averaged spike vector of a population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationReadout {
    pub linear: Linear,
}

impl PopulationReadout {
    pub fn new(linear: Linear) -> Self {
        Self { linear }
    }

    pub fn mean_rates(spikes: &[Vec<f64>]) -> Vec<f64> {
        let n = spikes.first().map_or(0, |s| s.len());
        let mut m = vec![0.0; n];
        for s in spikes {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let t = spikes.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= t);
        m
    }

    pub fn decode(&self, spikes: &[Vec<f64>]) -> Vec<f64> {
        self.linear.forward(&Self::mean_rates(spikes))
    }

    /// Gradient w.r.t. each step's spikes (identical across steps).
    pub fn backward(&self, spikes: &[Vec<f64>], d_out: &[f64], grad: &mut LinearGrad) -> Vec<Vec<f64>> {
        let mean = Self::mean_rates(spikes);
        let mut dm = vec![0.0; self.linear.n_in];
        self.linear.backward(&mean, d_out, grad, Some(&mut dm));
        let t = spikes.len().max(1) as f64;
        dm.iter_mut().for_each(|d| *d /= t);
        vec![dm; spikes.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_spikes_give_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = PopulationReadout::new(Linear::init(8, 5, &mut rng));
        assert_eq!(r.decode(&vec![vec![0.0; 8]; 4]), r.linear.b);
    }

    #[test]
    fn linear_in_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = PopulationReadout::new(Linear::init(8, 5, &mut rng));
        let s: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect()).collect();
        let s2: Vec<Vec<f64>> = s.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
        let a = r.decode(&s);
        let b = r.decode(&s2);
        for ((a, b), bias) in a.iter().zip(&b).zip(&r.linear.b) {
            assert!(((b - bias) - 2.0 * (a - bias)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = PopulationReadout::new(Linear::init(480, 5, &mut rng));
        let s: Vec<Vec<f64>> = (0..4).map(|_| (0..480).map(|_| if rng.random_bool(0.2) { 1.0 } else { 0.0 }).collect()).collect();
        let out = r.decode(&s);
        for k in 0..5 {
            let mut acc = r.linear.b[k];
            for j in 0..480 {
                let rate = (s[0][j] + s[1][j] + s[2][j] + s[3][j]) / 4.0;
                acc += r.linear.w[k * 480 + j] * rate;
            }
            assert!((acc - out[k]).abs() < 1e-12);
        }
    }
}

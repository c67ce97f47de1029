use rand::Rng;
use serde::{Deserialize, Serialize};

use super::if_layer::{IfNeurons, IfTrace};
use super::linear::{Linear, LinearGrad};

/// Spiking recurrent memory: IF neurons driven by the per-step input, plus the
/// previous fixation's last-step spikes at the first step only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikingRnn {
    pub w_xr: Linear,
    pub w_rr: Linear,
    pub neurons: IfNeurons,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnGrad {
    pub w_xr: LinearGrad,
    pub w_rr: LinearGrad,
}

impl RnnGrad {
    pub fn zeros(rnn: &SpikingRnn) -> Self {
        Self { w_xr: LinearGrad::zeros(&rnn.w_xr), w_rr: LinearGrad::zeros(&rnn.w_rr) }
    }

    pub fn clear(&mut self) {
        self.w_xr.clear();
        self.w_rr.clear();
    }

    pub fn norm_sq(&self) -> f64 {
        self.w_xr.norm_sq() + self.w_rr.norm_sq()
    }

    pub fn scale(&mut self, s: f64) {
        self.w_xr.scale(s);
        self.w_rr.scale(s);
    }
}

/// One fixation's forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnStep {
    pub inputs: Vec<Vec<f64>>,
    pub h_prev: Vec<f64>,
    pub spikes: Vec<Vec<f64>>,
    pub trace: IfTrace,
}

impl RnnStep {
    pub fn h_next(&self) -> &[f64] {
        self.spikes.last().expect("at least one time step")
    }

    pub fn mean_output(&self) -> Vec<f64> {
        super::PopulationReadout::mean_rates(&self.spikes)
    }
}

impl SpikingRnn {
    pub fn init<R: Rng + ?Sized>(n_in: usize, hidden: usize, neurons: IfNeurons, rng: &mut R) -> Self {
        Self { w_xr: Linear::init(n_in, hidden, rng), w_rr: Linear::init(hidden, hidden, rng), neurons }
    }

    pub fn hidden(&self) -> usize {
        self.w_xr.n_out
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.hidden()]
    }

    /// Membranes are reset at entry; `h_prev` enters at the first step only.
    pub fn fixation(&self, inputs: &[Vec<f64>], h_prev: &[f64]) -> RnnStep {
        assert!(!inputs.is_empty(), "need at least one time step");
        let mut ys: Vec<Vec<f64>> = inputs.iter().map(|x| self.w_xr.forward(x)).collect();
        let rec = self.w_rr.forward_sparse(h_prev);
        for (y, r) in ys[0].iter_mut().zip(&rec) {
            *y += r;
        }
        let (spikes, trace) = self.neurons.run(&ys);
        RnnStep { inputs: inputs.to_vec(), h_prev: h_prev.to_vec(), spikes, trace }
    }

    /// Back-propagate `d_spikes` (per step) for one fixation; `h_next`'s
    /// gradient must already be folded into the last step. Returns dL/dh_prev.
    pub fn backward(&self, step: &RnnStep, d_spikes: &[Vec<f64>], grad: &mut RnnGrad) -> Vec<f64> {
        let d_y = self.neurons.backward(&step.trace, d_spikes);
        for (x, dy) in step.inputs.iter().zip(&d_y) {
            self.w_xr.backward(x, dy, &mut grad.w_xr, None);
        }
        let mut dh = vec![0.0; self.hidden()];
        self.w_rr.backward(&step.h_prev, &d_y[0], &mut grad.w_rr, Some(&mut dh));
        dh
    }

    /// Run a sequence of fixations from a zero hidden state.
    pub fn unroll(&self, fixation_inputs: &[Vec<Vec<f64>>]) -> Vec<RnnStep> {
        let mut h = self.zero_state();
        fixation_inputs
            .iter()
            .map(|x| {
                let s = self.fixation(x, &h);
                h = s.h_next().to_vec();
                s
            })
            .collect()
    }

    /// BPTT over an unrolled sequence; `d_spikes[l][t]` is the loss gradient
    /// w.r.t. fixation `l`'s spikes at step `t` (excluding the recurrent path).
    pub fn backward_sequence(&self, steps: &[RnnStep], d_spikes: &[Vec<Vec<f64>>], grad: &mut RnnGrad) {
        let mut dh_next = vec![0.0; self.hidden()];
        for (step, ds) in steps.iter().zip(d_spikes).rev() {
            let mut ds = ds.clone();
            let last = ds.len() - 1;
            for (a, b) in ds[last].iter_mut().zip(&dh_next) {
                *a += b;
            }
            dh_next = self.backward(step, &ds, grad);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::SpikeFn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rnn(seed: u64, spike_fn: SpikeFn) -> SpikingRnn {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = SpikingRnn::init(2, 64, IfNeurons { spike_fn, ..Default::default() }, &mut rng);
        r.w_xr.w.iter_mut().for_each(|w| *w *= 3.0);
        r.w_rr.w.iter_mut().for_each(|w| *w *= 2.0);
        r
    }

    #[test]
    fn silent_without_drive() {
        let r = SpikingRnn { w_xr: Linear::zeros(2, 64), w_rr: Linear::zeros(64, 64), neurons: IfNeurons::default() };
        let s = r.fixation(&vec![vec![0.0, 0.0]; 4], &r.zero_state());
        assert!(s.spikes.iter().flatten().all(|&v| v == 0.0));
        assert!(s.h_next().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_straight_line_reference() {
        let r = random_rnn(5, SpikeFn::Heaviside);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut h: Vec<f64> = (0..64).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        for _ in 0..5 {
            let x: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let got = r.fixation(&x, &h);
            // Reference: explicit loops, no shared helpers.
            let mut v = [0.5f64; 64];
            let mut last = vec![0.0; 64];
            for t in 0..4 {
                for j in 0..64 {
                    let mut y = r.w_xr.b[j] + r.w_xr.w[j * 2] * x[t][0] + r.w_xr.w[j * 2 + 1] * x[t][1];
                    if t == 0 {
                        y += r.w_rr.b[j];
                        for k in 0..64 {
                            y += r.w_rr.w[j * 64 + k] * h[k];
                        }
                    }
                    v[j] += y;
                    let s = if v[j] >= 1.0 { 1.0 } else { 0.0 };
                    v[j] -= s;
                    assert_eq!(got.spikes[t][j], s, "t {t} j {j}");
                    last[j] = s;
                }
            }
            assert_eq!(got.h_next(), &last[..]);
            h = last;
        }
    }

    #[test]
    fn hidden_state_acts_only_at_first_step() {
        let r = random_rnn(7, SpikeFn::Heaviside);
        let x = vec![vec![0.2, -0.4]; 4];
        let h0 = r.zero_state();
        let mut h1 = h0.clone();
        h1[3] = 1.0;
        h1[40] = 1.0;
        let a = r.fixation(&x, &h0);
        let b = r.fixation(&x, &h1);
        // Step-1 membrane offsets differ exactly by the recurrent drive.
        let drive = r.w_rr.forward(&h1);
        let base = r.w_rr.forward(&h0);
        for j in 0..64 {
            let want = drive[j] - base[j];
            assert!(((b.trace.u[0][j] - a.trace.u[0][j]) - want).abs() < 1e-12);
        }
        // Zeroing W_rr removes any influence of h.
        let mut r2 = r.clone();
        r2.w_rr = Linear::zeros(64, 64);
        assert_eq!(r2.fixation(&x, &h0).spikes, r2.fixation(&x, &h1).spikes);
    }

    #[test]
    fn repeated_fixation_is_reproducible() {
        let r = random_rnn(8, SpikeFn::Heaviside);
        let x = vec![vec![0.7, 0.1]; 4];
        let h = r.zero_state();
        assert_eq!(r.fixation(&x, &h), r.fixation(&x, &h));
    }

    #[test]
    fn bptt_matches_finite_difference_in_smooth_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let neurons = IfNeurons { spike_fn: SpikeFn::SmoothAtan, ..Default::default() };
        let r = SpikingRnn::init(2, 6, neurons, &mut rng);
        let xs: Vec<Vec<Vec<f64>>> = (0..3).map(|l| vec![vec![0.3 * l as f64, -0.2]; 4]).collect();
        let c: Vec<f64> = (0..6).map(|j| (j as f64 - 2.5) * 0.4).collect();
        let loss = |r: &SpikingRnn| -> f64 {
            r.unroll(&xs).iter().flat_map(|s| s.spikes.iter()).map(|s| s.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()).sum()
        };
        let steps = r.unroll(&xs);
        let d: Vec<Vec<Vec<f64>>> = steps.iter().map(|_| vec![c.clone(); 4]).collect();
        let mut g = RnnGrad::zeros(&r);
        r.backward_sequence(&steps, &d, &mut g);
        let h = 1e-6;
        for i in 0..r.w_rr.w.len() {
            let (mut p, mut m) = (r.clone(), r.clone());
            p.w_rr.w[i] += h;
            m.w_rr.w[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - g.w_rr.w[i]).abs() < 1e-6, "w_rr {i}: {fd} vs {}", g.w_rr.w[i]);
        }
        for i in 0..r.w_xr.b.len() {
            let (mut p, mut m) = (r.clone(), r.clone());
            p.w_xr.b[i] += h;
            m.w_xr.b[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - g.w_xr.b[i]).abs() < 1e-6, "b_x {i}: {fd} vs {}", g.w_xr.b[i]);
        }
    }
}

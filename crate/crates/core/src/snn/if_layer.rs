use serde::{Deserialize, Serialize};

use super::linear::{Linear, LinearGrad};
use super::{DEFAULT_THRESHOLD, DEFAULT_V_INIT, SpikeCount, SpikeFn, surrogate_grad_atan};
use crate::error::{Error, Result};

/// Membrane dynamics of a population of scaled IF neurons:
/// `v~ = v + y / lambda`, `s~ = H(v~ - theta)`, `s = lambda s~`, `v = v~ - theta s~`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfNeurons {
    pub lambda: f64,
    pub threshold: f64,
    pub v_init: f64,
    pub spike_fn: SpikeFn,
}

impl Default for IfNeurons {
    fn default() -> Self {
        Self { lambda: 1.0, threshold: DEFAULT_THRESHOLD, v_init: DEFAULT_V_INIT, spike_fn: SpikeFn::Heaviside }
    }
}

/// What the backward pass needs from a T-step forward run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IfTrace {
    /// Pre-reset membrane `v~_t - theta`, per step.
    pub u: Vec<Vec<f64>>,
}

impl IfNeurons {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    /// Advance membranes `v` by one step under drive `y`, returning scaled spikes
    /// and the pre-reset offsets `v~ - theta`.
    #[inline]
    pub fn step(&self, v: &mut [f64], y: &[f64], out: &mut [f64], u_out: &mut [f64]) {
        for i in 0..v.len() {
            let vt = v[i] + y[i] / self.lambda;
            let u = vt - self.threshold;
            let s = self.spike_fn.fire(u);
            out[i] = self.lambda * s;
            v[i] = vt - self.threshold * s;
            u_out[i] = u;
        }
    }

    /// Run from a fresh membrane over `ys.len()` steps.
    pub fn run(&self, ys: &[Vec<f64>]) -> (Vec<Vec<f64>>, IfTrace) {
        let n = ys.first().map_or(0, |y| y.len());
        let mut v = vec![self.v_init; n];
        let mut outs = Vec::with_capacity(ys.len());
        let mut trace = IfTrace { u: Vec::with_capacity(ys.len()) };
        for y in ys {
            let mut o = vec![0.0; n];
            let mut u = vec![0.0; n];
            self.step(&mut v, y, &mut o, &mut u);
            outs.push(o);
            trace.u.push(u);
        }
        (outs, trace)
    }

    /// Back-propagate output gradients `d_out[t]` (w.r.t. scaled spikes) through
    /// time to gradients w.r.t. the drive `y_t`. The reset path is differentiated.
    pub fn backward(&self, trace: &IfTrace, d_out: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let steps = trace.u.len();
        let n = trace.u.first().map_or(0, |u| u.len());
        let mut d_y = vec![vec![0.0; n]; steps];
        // dL/dv_t carried backwards.
        let mut dv = vec![0.0; n];
        for t in (0..steps).rev() {
            for i in 0..n {
                let sg = surrogate_grad_atan(trace.u[t][i]);
                let d_vt = self.lambda * d_out[t][i] * sg + dv[i] * (1.0 - self.threshold * sg);
                d_y[t][i] = d_vt / self.lambda;
                dv[i] = d_vt;
            }
        }
        d_y
    }
}

/// A weighted IF layer with its own membrane state, for step-by-step simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfLayer {
    pub linear: Linear,
    pub neurons: IfNeurons,
    #[serde(skip)]
    v: Vec<f64>,
    #[serde(skip)]
    counting: Option<SpikeCount>,
}

impl IfLayer {
    pub fn new(linear: Linear, neurons: IfNeurons) -> Self {
        let v = vec![neurons.v_init; linear.n_out];
        Self { linear, neurons, v, counting: None }
    }

    pub fn size(&self) -> usize {
        self.linear.n_out
    }

    pub fn membrane(&self) -> &[f64] {
        &self.v
    }

    pub fn reset(&mut self) {
        self.v.clear();
        self.v.resize(self.linear.n_out, self.neurons.v_init);
    }

    pub fn enable_counting(&mut self) {
        self.counting = Some(SpikeCount::default());
    }

    pub fn spike_count(&self) -> Option<SpikeCount> {
        self.counting
    }

    /// One step: drive by `W s + b`, fire, reset by subtraction.
    pub fn step(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.linear.n_in {
            return Err(Error::Shape(format!("IF layer expects {} inputs, got {}", self.linear.n_in, input.len())));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("IF layer input"));
        }
        if self.v.len() != self.linear.n_out {
            self.reset();
        }
        let y = self.linear.forward_sparse(input);
        let mut out = vec![0.0; y.len()];
        let mut u = vec![0.0; y.len()];
        self.neurons.step(&mut self.v, &y, &mut out, &mut u);
        if let Some(c) = self.counting.as_mut() {
            c.spikes += out.iter().filter(|&&s| s != 0.0).count() as u64;
            c.neuron_steps += out.len() as u64;
        }
        Ok(out)
    }

    /// Fresh-membrane run over a sequence of inputs; returns outputs, the
    /// membrane trace and the drives (for the backward pass).
    pub fn forward_trace(&self, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, IfTrace) {
        let ys: Vec<Vec<f64>> = inputs.iter().map(|x| self.linear.forward_sparse(x)).collect();
        self.neurons.run(&ys)
    }

    /// Accumulates weight gradients and returns input gradients per step.
    pub fn backward(&self, inputs: &[Vec<f64>], trace: &IfTrace, d_out: &[Vec<f64>], grad: &mut LinearGrad, want_dx: bool) -> Vec<Vec<f64>> {
        let d_y = self.neurons.backward(trace, d_out);
        let mut dxs = Vec::with_capacity(inputs.len());
        for (x, dy) in inputs.iter().zip(&d_y) {
            if want_dx {
                let mut dx = vec![0.0; self.linear.n_in];
                self.linear.backward(x, dy, grad, Some(&mut dx));
                dxs.push(dx);
            } else {
                self.linear.backward(x, dy, grad, None);
            }
        }
        dxs
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::snn::{Linear, LinearGrad};

pub const LEAKY_SLOPE: f64 = 0.1;
pub const CRITIC_HIDDEN: usize = 64;

/// Leaky-ReLU multilayer perceptron with a scalar output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<LinearGrad>,
}

impl MlpGrad {
    pub fn zeros(m: &Mlp) -> Self {
        Self { layers: m.layers.iter().map(LinearGrad::zeros).collect() }
    }
}

impl Mlp {
    /// `depth` hidden layers of width `hidden`, then a linear scalar output.
    pub fn init<R: Rng + ?Sized>(n_in: usize, hidden: usize, depth: usize, slope: f64, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(depth + 1);
        let mut n = n_in;
        for _ in 0..depth {
            layers.push(Linear::init(n, hidden, rng));
            n = hidden;
        }
        layers.push(Linear::init(n, 1, rng));
        Self { layers, slope }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    fn act(&self, x: f64) -> f64 {
        if x >= 0.0 { x } else { self.slope * x }
    }

    pub fn forward(&self, x: &[f64]) -> (f64, MlpTrace) {
        let last = self.layers.len() - 1;
        let mut tr = MlpTrace { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(last) };
        let mut h = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let y = l.forward(&h);
            tr.inputs.push(h);
            if i == last {
                return (y[0], tr);
            }
            h = y.iter().map(|&v| self.act(v)).collect();
            tr.pre.push(y);
        }
        unreachable!("an MLP has an output layer")
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.forward(x).0
    }

    /// Back-propagate `d_out`; parameter gradients are accumulated when `grad`
    /// is given. Returns the input gradient.
    pub fn backward(&self, tr: &MlpTrace, d_out: f64, mut grad: Option<&mut MlpGrad>) -> Vec<f64> {
        let mut dy = vec![d_out];
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let mut dx = vec![0.0; l.n_in];
            match grad.as_deref_mut() {
                Some(g) => l.backward(&tr.inputs[i], &dy, &mut g.layers[i], Some(&mut dx)),
                None => l.backward_input(&dy, &mut dx),
            }
            if i > 0 {
                for (d, &p) in dx.iter_mut().zip(&tr.pre[i - 1]) {
                    if p < 0.0 {
                        *d *= self.slope;
                    }
                }
            }
            dy = dx;
        }
        dy
    }
}

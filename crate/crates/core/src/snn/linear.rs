use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense affine map `y = W x + b`, weights stored row-major as `[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearGrad {
    pub fn zeros(l: &Linear) -> Self {
        Self { w: vec![0.0; l.w.len()], b: vec![0.0; l.b.len()] }
    }

    pub fn clear(&mut self) {
        self.w.fill(0.0);
        self.b.fill(0.0);
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().chain(&self.b).map(|g| g * g).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|g| *g *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|g| g.is_finite())
    }
}

impl Linear {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, w: vec![0.0; n_in * n_out], b: vec![0.0; n_out] }
    }

    /// Uniform fan-in initialisation, `U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let k = 1.0 / (n_in as f64).sqrt();
        let w = (0..n_in * n_out).map(|_| rng.random_range(-k..k)).collect();
        let b = (0..n_out).map(|_| rng.random_range(-k..k)).collect();
        Self { n_in, n_out, w, b }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_out];
        self.forward_into(x, &mut y);
        y
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            *yo = self.b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Forward pass for a mostly-zero input (spikes): only nonzero columns are read.
    pub fn forward_sparse(&self, x: &[f64]) -> Vec<f64> {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        if nz.len() * 2 > x.len() {
            return self.forward(x);
        }
        (0..self.n_out)
            .map(|o| {
                let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
                self.b[o] + nz.iter().map(|&(i, v)| row[i] * v).sum::<f64>()
            })
            .collect()
    }

    /// Accumulate parameter gradients for one input/output-gradient pair and
    /// optionally write the input gradient.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut LinearGrad, dx: Option<&mut [f64]>) {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        let sparse = nz.len() * 2 <= x.len();
        for (o, &g) in dy.iter().enumerate() {
            grad.b[o] += g;
            if g == 0.0 {
                continue;
            }
            let grow = &mut grad.w[o * self.n_in..(o + 1) * self.n_in];
            if sparse {
                for &(i, xi) in &nz {
                    grow[i] += g * xi;
                }
            } else {
                for (gw, &xi) in grow.iter_mut().zip(x) {
                    *gw += g * xi;
                }
            }
        }
        if let Some(dx) = dx {
            self.backward_input(dy, dx);
        }
    }

    /// `dx = W^T dy`, without touching parameter gradients.
    pub fn backward_input(&self, dy: &[f64], dx: &mut [f64]) {
        dx.fill(0.0);
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            for (d, &w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

use crate::snn::{Linear, LinearGrad};

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every slice in `params` with the matching gradient slice.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }

    pub fn step_linears(&mut self, params: Vec<&mut Linear>, grads: Vec<&LinearGrad>) {
        let mut p: Vec<&mut [f64]> = Vec::with_capacity(params.len() * 2);
        for l in params {
            p.push(&mut l.w);
            p.push(&mut l.b);
        }
        let g: Vec<&[f64]> = grads.iter().flat_map(|g| [g.w.as_slice(), g.b.as_slice()]).collect();
        self.step(&mut p, &g);
    }
}

pub fn grad_norm(grads: &[&LinearGrad]) -> f64 {
    grads.iter().map(|g| g.norm_sq()).sum::<f64>().sqrt()
}

/// Rescale so the joint norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grads: Vec<&mut LinearGrad>, max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            g.scale(s);
        }
    }
    norm
}

/// `target = tau * online + (1 - tau) * target`.
pub fn polyak(target: Vec<&mut Linear>, online: Vec<&Linear>, tau: f64) {
    for (t, o) in target.into_iter().zip(online) {
        for (a, &b) in t.w.iter_mut().zip(&o.w).chain(t.b.iter_mut().zip(&o.b)) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
}

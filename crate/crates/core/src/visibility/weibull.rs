use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::NelderMead;

pub const GUESS_RATE: f64 = 0.5;
pub const MAX_LAPSE: f64 = 0.06;
/// Likelihood-ratio statistic against a flat psychometric function below
/// which the slope is treated as unidentified (chi-square, 1 dof, 5%).
const LR_CRITICAL: f64 = 3.841;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeibullOptions {
    /// Fit against `x_max - x` so that performance falls with the raw level.
    pub inverted: bool,
    /// Reflection point for the inverted axis; defaults to the largest level.
    pub x_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub alpha: f64,
    pub beta: f64,
    pub guess_rate: f64,
    pub lapse_rate: f64,
    pub inverted: bool,
    pub x_max: f64,
    pub log_likelihood: f64,
    /// Set when the data do not constrain the curve (flat or saturated
    /// responses); the parameters are then a boundary solution.
    pub non_identifiable: bool,
}

impl WeibullFit {
    fn axis(&self, level: f64) -> f64 {
        if self.inverted { self.x_max - level } else { level }
    }

    /// Probability correct at a raw stimulus level.
    pub fn predict(&self, level: f64) -> f64 {
        weibull_p(self.axis(level), self.alpha, self.beta, self.lapse_rate)
    }

    /// Raw level at which the fitted curve reaches `p`, if it does.
    pub fn threshold(&self, p: f64) -> Option<f64> {
        let q = (p - self.guess_rate) / (1.0 - self.guess_rate - self.lapse_rate);
        if !(q > 0.0 && q < 1.0) {
            return None;
        }
        let x = self.alpha * (-(1.0 - q).ln()).powf(1.0 / self.beta);
        Some(self.axis(x))
    }
}

fn weibull_p(x: f64, alpha: f64, beta: f64, lapse: f64) -> f64 {
    let core = if x <= 0.0 { 0.0 } else { 1.0 - (-(x / alpha).powf(beta)).exp() };
    GUESS_RATE + (1.0 - GUESS_RATE - lapse) * core
}

fn binom_ll(k: f64, n: f64, p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    k * p.ln() + (n - k) * (1.0 - p).ln()
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Maximum-likelihood fit of a 2AFC Weibull with guess rate 0.5 and lapse
/// rate in `[0, 0.06]`.
pub fn fit_weibull(levels: &[f64], correct: &[u64], total: &[u64], opts: &WeibullOptions) -> Result<WeibullFit> {
    if levels.len() < 3 {
        return Err(Error::Config("need at least 3 stimulus levels".into()));
    }
    if correct.len() != levels.len() || total.len() != levels.len() {
        return Err(Error::Shape("levels, correct and total differ in length".into()));
    }
    if correct.iter().zip(total).any(|(k, n)| k > n || *n == 0) {
        return Err(Error::Config("each level needs 0 < total and correct <= total".into()));
    }
    if levels.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("stimulus level"));
    }
    let x_max = opts.x_max.unwrap_or_else(|| levels.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let xs: Vec<f64> = levels.iter().map(|&l| if opts.inverted { x_max - l } else { l }).collect();
    if xs.iter().any(|&x| x < 0.0) {
        return Err(Error::Config("stimulus levels must be non-negative on the fitted axis".into()));
    }
    let pos: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.is_empty() {
        return Err(Error::Config("no positive stimulus level".into()));
    }
    let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().copied().fold(0.0, f64::max);
    let (ln_a_lo, ln_a_hi) = ((lo / 100.0).ln(), (hi * 100.0).ln());
    let (ln_b_lo, ln_b_hi) = (0.05f64.ln(), 50.0f64.ln());

    let k: Vec<f64> = correct.iter().map(|&v| v as f64).collect();
    let n: Vec<f64> = total.iter().map(|&v| v as f64).collect();
    let ll = |a: f64, b: f64, lapse: f64| -> f64 {
        xs.iter().zip(&k).zip(&n).map(|((&x, &k), &n)| binom_ll(k, n, weibull_p(x, a, b, lapse))).sum()
    };
    let neg = |v: &[f64]| {
        let (la, lb) = (v[0].clamp(ln_a_lo, ln_a_hi), v[1].clamp(ln_b_lo, ln_b_hi));
        // Quadratic wall keeps the simplex inside the box.
        let wall = (v[0] - la).powi(2) + (v[1] - lb).powi(2);
        -ll(la.exp(), lb.exp(), MAX_LAPSE * sigmoid(v[2])) + 1e3 * wall
    };

    let nm = NelderMead { max_evals: 3000, f_tol: 1e-13, x_tol: 1e-9, initial_step: 0.5, restarts: 2 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for i in 0..6 {
        for &b0 in &[0.7f64, 2.0, 5.0] {
            for &s0 in &[-4.0, 0.0] {
                let a0 = ln_a_lo + 2.0 + (ln_a_hi - ln_a_lo - 4.0) * i as f64 / 5.0;
                let m = nm.minimize(neg, &[a0, b0.ln(), s0]);
                if best.as_ref().is_none_or(|b| m.value < b.1) {
                    best = Some((m.x, m.value));
                }
            }
        }
    }
    let (v, _) = best.expect("at least one start");
    let (la, lb) = (v[0].clamp(ln_a_lo, ln_a_hi), v[1].clamp(ln_b_lo, ln_b_hi));
    let (alpha, beta, lapse) = (la.exp(), lb.exp(), MAX_LAPSE * sigmoid(v[2]));
    let log_likelihood = ll(alpha, beta, lapse);

    let p_flat = k.iter().sum::<f64>() / n.iter().sum::<f64>();
    let ll_flat: f64 = k.iter().zip(&n).map(|(&k, &n)| binom_ll(k, n, p_flat)).sum();
    let at_edge = |x: f64, lo: f64, hi: f64| (x - lo).abs() < 1e-3 || (x - hi).abs() < 1e-3;
    let non_identifiable = 2.0 * (log_likelihood - ll_flat) < LR_CRITICAL || at_edge(la, ln_a_lo, ln_a_hi) || at_edge(lb, ln_b_lo, ln_b_hi);

    Ok(WeibullFit {
        alpha,
        beta,
        guess_rate: GUESS_RATE,
        lapse_rate: lapse,
        inverted: opts.inverted,
        x_max,
        log_likelihood,
        non_identifiable,
    })
}

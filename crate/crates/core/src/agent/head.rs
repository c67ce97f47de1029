//! Squashed 2-D Gaussian action head: five population-decoded values give the
//! mean and a Cholesky factor (softplus diagonal) of the pre-squash covariance.

/// Keeps the Cholesky diagonal away from zero.
pub const MIN_SCALE: f64 = 1e-3;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn softplus(x: f64) -> f64 {
    if x > 30.0 { x } else { x.exp().ln_1p() }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 - tanh(u)^2)` without cancellation.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadSample {
    pub eps: [f64; 2],
    pub u: [f64; 2],
    /// Squashed action in `[-1, 1]^2`.
    pub a: [f64; 2],
    pub log_prob: f64,
    pub diag: [f64; 2],
}

pub fn sample_head(out: &[f64], eps: [f64; 2]) -> HeadSample {
    let d0 = softplus(out[2]) + MIN_SCALE;
    let d1 = softplus(out[4]) + MIN_SCALE;
    let u = [out[0] + d0 * eps[0], out[1] + out[3] * eps[0] + d1 * eps[1]];
    let a = [u[0].tanh(), u[1].tanh()];
    let log_prob = -0.5 * (eps[0] * eps[0] + eps[1] * eps[1]) - LN_2PI - d0.ln() - d1.ln()
        - log_one_minus_tanh_sq(u[0])
        - log_one_minus_tanh_sq(u[1]);
    HeadSample { eps, u, a, log_prob, diag: [d0, d1] }
}

/// Gradient w.r.t. the five head inputs given `dL/da` and `dL/dlog_prob`
/// (reparameterised: `eps` held fixed).
pub fn head_backward(out: &[f64], s: &HeadSample, d_a: [f64; 2], d_logp: f64) -> [f64; 5] {
    let g_u = [
        d_a[0] * (1.0 - s.a[0] * s.a[0]) + d_logp * 2.0 * s.a[0],
        d_a[1] * (1.0 - s.a[1] * s.a[1]) + d_logp * 2.0 * s.a[1],
    ];
    let d_d0 = g_u[0] * s.eps[0] - d_logp / s.diag[0];
    let d_d1 = g_u[1] * s.eps[1] - d_logp / s.diag[1];
    [g_u[0], g_u[1], d_d0 * sigmoid(out[2]), g_u[1] * s.eps[0], d_d1 * sigmoid(out[4])]
}

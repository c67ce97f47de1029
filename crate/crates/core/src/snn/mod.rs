//! Spiking primitives: QCFS activation, scaled integrate-and-fire neurons with
//! reset by subtraction, the spiking RNN cell, population readout and the
//! surrogate gradients used to train them.

mod checkpoint;
mod if_layer;
mod linear;
mod readout;
mod rnn;

pub use checkpoint::{LayerManifest, MANIFEST_FILE, Manifest, load_checkpoint, save_checkpoint};
pub use if_layer::{IfLayer, IfNeurons, IfTrace};
pub use linear::{Linear, LinearGrad};
pub use readout::PopulationReadout;
pub use rnn::{RnnGrad, RnnStep, SpikingRnn};

use serde::{Deserialize, Serialize};

/// Inference time steps per fixation.
pub const DEFAULT_TIME_STEPS: usize = 4;
pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_V_INIT: f64 = 0.5;
pub const DEFAULT_QCFS_LAMBDA: f64 = 8.0;

/// `lambda * clip(floor(x T / lambda + 0.5) / T, 0, 1)`.
pub fn qcfs(x: f64, lambda: f64, t: usize) -> f64 {
    let t = t as f64;
    let m = (x * t / lambda + 0.5).floor().clamp(0.0, t);
    lambda * (m / t)
}

/// `atan(pi u) / pi + 1/2`, the smooth stand-in for the Heaviside step.
pub fn atan_primitive(u: f64) -> f64 {
    (std::f64::consts::PI * u).atan() / std::f64::consts::PI + 0.5
}

/// Derivative of [`atan_primitive`]: `1 / (1 + (pi u)^2)`.
pub fn surrogate_grad_atan(u: f64) -> f64 {
    let z = std::f64::consts::PI * u;
    1.0 / (1.0 + z * z)
}

/// How a neuron turns `v - theta` into a (unit) spike in the forward pass.
/// The backward pass always uses the atan surrogate; with `SmoothAtan` the
/// forward pass uses the matching primitive, so the whole network becomes
/// differentiable and gradients can be checked against finite differences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpikeFn {
    #[default]
    Heaviside,
    SmoothAtan,
}

impl SpikeFn {
    #[inline]
    pub fn fire(self, u: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if u >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::SmoothAtan => atan_primitive(u),
        }
    }
}

/// Spike counts gathered by a layer while counting is switched on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeCount {
    pub spikes: u64,
    /// Neuron-steps simulated.
    pub neuron_steps: u64,
}

impl SpikeCount {
    pub fn rate(&self) -> f64 {
        if self.neuron_steps == 0 { 0.0 } else { self.spikes as f64 / self.neuron_steps as f64 }
    }

    pub fn add(&mut self, other: SpikeCount) {
        self.spikes += other.spikes;
        self.neuron_steps += other.neuron_steps;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qcfs_examples() {
        assert_eq!(qcfs(3.0, 8.0, 4), 4.0);
        assert_eq!(qcfs(-1.0, 8.0, 4), 0.0);
        assert_eq!(qcfs(-0.999, 8.0, 4), 0.0);
        assert_eq!(qcfs(8.0, 8.0, 4), 8.0);
        assert_eq!(qcfs(100.0, 8.0, 4), 8.0);
        assert_eq!(qcfs(1.0, 8.0, 4), 2.0);
        assert_eq!(qcfs(0.99, 8.0, 4), 0.0);
    }

    #[test]
    fn qcfs_levels() {
        for i in -200..200 {
            let x = i as f64 * 0.07;
            let y = qcfs(x, 8.0, 4);
            let m = y / 2.0;
            assert!((0.0..=8.0).contains(&y));
            assert_eq!(m, m.round());
        }
    }

    #[test]
    fn surrogate_values() {
        assert_eq!(surrogate_grad_atan(0.0), 1.0);
        assert!(surrogate_grad_atan(1e6) < 1e-12);
        assert!(surrogate_grad_atan(-1e6) < 1e-12);
        let h = 1e-5;
        let fd = (atan_primitive(0.3 + h) - atan_primitive(0.3 - h)) / (2.0 * h);
        assert!((fd - surrogate_grad_atan(0.3)).abs() < 1e-6);
    }
}

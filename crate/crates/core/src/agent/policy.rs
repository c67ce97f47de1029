use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::detector::DetectorOutput;
use super::head::{HeadSample, sample_head};
use crate::geom::Vec2;
use crate::snn::{IfLayer, IfNeurons, IfTrace, Linear, LinearGrad, PopulationReadout, RnnStep, SpikingRnn, DEFAULT_TIME_STEPS};
use crate::stimulus::ScreenGeometry;

pub const RNN_UNITS: usize = 64;
pub const ACTOR_UNITS: usize = 480;
pub const HEAD_OUTPUTS: usize = 5;
/// Fixations can land anywhere in the 651 px square, i.e. pixels `[0, 650]`.
pub const SQUARE_PX: f64 = 650.0;

/// Half-width of the square enclosing the search image (deg).
pub fn half_span_deg() -> f64 {
    0.5 * SQUARE_PX / ScreenGeometry::default().px_per_deg()
}

/// Map a squashed action in `[-1, 1]^2` to degrees (pixel range `[0, 650]`).
pub fn action_to_deg(a: [f64; 2]) -> Vec2 {
    let h = half_span_deg();
    Vec2::new(a[0] * h, a[1] * h)
}

pub fn deg_to_action(v: Vec2) -> [f64; 2] {
    let h = half_span_deg();
    [v.x / h, v.y / h]
}

pub fn clip_to_square(v: Vec2) -> (Vec2, bool) {
    let h = half_span_deg();
    let c = Vec2::new(v.x.clamp(-h, h), v.y.clamp(-h, h));
    (c, c != v)
}

/// A search strategy for fixations where the target has not been found.
pub trait SearchPolicy {
    fn id(&self) -> String;
    fn reset(&mut self);
    /// Memory update with the detector output at the current fixation.
    fn observe(&mut self, out: &DetectorOutput);
    /// Next fixation (deg) when the detector reports no target.
    fn propose(&mut self, current: Vec2, rng: &mut dyn RngCore) -> Vec2;
}

/// Two IF layers and a population readout to the five head values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorNet {
    pub l1: IfLayer,
    pub l2: IfLayer,
    pub readout: PopulationReadout,
}

#[derive(Clone, Debug)]
pub struct ActorTrace {
    pub s1: Vec<Vec<f64>>,
    pub t1: IfTrace,
    pub s2: Vec<Vec<f64>>,
    pub t2: IfTrace,
    pub out: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ActorGrad {
    pub l1: LinearGrad,
    pub l2: LinearGrad,
    pub readout: LinearGrad,
}

impl ActorGrad {
    pub fn zeros(a: &ActorNet) -> Self {
        Self { l1: LinearGrad::zeros(&a.l1.linear), l2: LinearGrad::zeros(&a.l2.linear), readout: LinearGrad::zeros(&a.readout.linear) }
    }

    pub fn clear(&mut self) {
        self.l1.clear();
        self.l2.clear();
        self.readout.clear();
    }

    pub fn norm_sq(&self) -> f64 {
        self.l1.norm_sq() + self.l2.norm_sq() + self.readout.norm_sq()
    }

    pub fn scale(&mut self, s: f64) {
        self.l1.scale(s);
        self.l2.scale(s);
        self.readout.scale(s);
    }
}

/// Fan-in uniform initialisation, widened so that a fresh network fires.
pub const SPIKING_INIT_GAIN: f64 = 2.0;

fn init_linear<R: Rng + ?Sized>(n_in: usize, n_out: usize, gain: f64, rng: &mut R) -> Linear {
    let mut l = Linear::init(n_in, n_out, rng);
    l.w.iter_mut().for_each(|w| *w *= gain);
    l
}

impl ActorNet {
    pub fn init<R: Rng + ?Sized>(n_in: usize, hidden: usize, neurons: IfNeurons, rng: &mut R) -> Self {
        Self {
            l1: IfLayer::new(init_linear(n_in, hidden, SPIKING_INIT_GAIN, rng), neurons),
            l2: IfLayer::new(init_linear(hidden, hidden, SPIKING_INIT_GAIN, rng), neurons),
            readout: PopulationReadout::new(Linear::init(hidden, HEAD_OUTPUTS, rng)),
        }
    }

    pub fn forward(&self, input_spikes: &[Vec<f64>]) -> ActorTrace {
        let (s1, t1) = self.l1.forward_trace(input_spikes);
        let (s2, t2) = self.l2.forward_trace(&s1);
        let out = self.readout.decode(&s2);
        ActorTrace { s1, t1, s2, t2, out }
    }

    /// Accumulate parameter gradients for `d_out` (w.r.t. the five head values).
    pub fn backward(&self, input_spikes: &[Vec<f64>], tr: &ActorTrace, d_out: &[f64], grad: &mut ActorGrad) {
        let d_s2 = self.readout.backward(&tr.s2, d_out, &mut grad.readout);
        let d_s1 = self.l2.backward(&tr.s1, &tr.t2, &d_s2, &mut grad.l2, true);
        self.l1.backward(input_spikes, &tr.t1, &d_s1, &mut grad.l1, false);
    }
}

/// Detector fixation estimate in network units, repeated over the time steps.
pub fn rnn_input(out: &DetectorOutput, time_steps: usize) -> Vec<Vec<f64>> {
    let a = deg_to_action(out.fix_loc_pred_deg);
    vec![vec![a[0], a[1]]; time_steps]
}

/// Spiking memory + spiking actor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpikingPolicy {
    pub rnn: SpikingRnn,
    pub actor: ActorNet,
    pub time_steps: usize,
    pub deterministic: bool,
    #[serde(skip)]
    state: Option<RnnStep>,
    #[serde(skip)]
    h: Vec<f64>,
}

impl SpikingPolicy {
    pub fn new(rnn: SpikingRnn, actor: ActorNet, time_steps: usize) -> Self {
        let h = rnn.zero_state();
        Self { rnn, actor, time_steps, deterministic: false, state: None, h }
    }

    pub fn init<R: Rng + ?Sized>(rnn_units: usize, actor_units: usize, rng: &mut R) -> Self {
        let neurons = IfNeurons::default();
        let mut rnn = SpikingRnn::init(2, rnn_units, neurons, rng);
        rnn.w_xr.w.iter_mut().for_each(|w| *w *= SPIKING_INIT_GAIN);
        let actor = ActorNet::init(rnn_units, actor_units, neurons, rng);
        Self::new(rnn, actor, DEFAULT_TIME_STEPS)
    }

    pub fn last_step(&self) -> Option<&RnnStep> {
        self.state.as_ref()
    }

    /// Head sample for the current memory state.
    pub fn act(&self, eps: [f64; 2]) -> HeadSample {
        let spikes = self.state.as_ref().map(|s| s.spikes.clone()).unwrap_or_else(|| vec![self.rnn.zero_state(); self.time_steps]);
        sample_head(&self.actor.forward(&spikes).out, eps)
    }
}

impl SearchPolicy for SpikingPolicy {
    fn id(&self) -> String {
        "spiking".into()
    }

    fn reset(&mut self) {
        self.state = None;
        self.h = self.rnn.zero_state();
    }

    fn observe(&mut self, out: &DetectorOutput) {
        if self.h.len() != self.rnn.hidden() {
            self.h = self.rnn.zero_state();
        }
        let step = self.rnn.fixation(&rnn_input(out, self.time_steps), &self.h);
        self.h = step.h_next().to_vec();
        self.state = Some(step);
    }

    fn propose(&mut self, _current: Vec2, rng: &mut dyn RngCore) -> Vec2 {
        let eps = if self.deterministic {
            [0.0, 0.0]
        } else {
            [StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)]
        };
        action_to_deg(self.act(eps).a)
    }
}

/// Fixed scan: an outer ring, an inner ring, then repeat.
#[derive(Clone, Debug)]
pub struct CircularScan {
    points: Vec<Vec2>,
    k: usize,
}

impl Default for CircularScan {
    fn default() -> Self {
        let ring = |r: f64, n: usize, phase: f64| {
            (0..n).map(move |i| {
                let th = phase + i as f64 * std::f64::consts::TAU / n as f64;
                Vec2::new(r * th.cos(), r * th.sin())
            })
        };
        let points = ring(4.8, 10, 0.0).chain(ring(2.0, 4, std::f64::consts::FRAC_PI_4)).collect();
        Self { points, k: 0 }
    }
}

impl SearchPolicy for CircularScan {
    fn id(&self) -> String {
        "circular".into()
    }

    fn reset(&mut self) {
        self.k = 0;
    }

    fn observe(&mut self, _out: &DetectorOutput) {}

    fn propose(&mut self, _current: Vec2, _rng: &mut dyn RngCore) -> Vec2 {
        let p = self.points[self.k % self.points.len()];
        self.k += 1;
        p
    }
}

/// Uniformly random fixations over the enclosing square.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl SearchPolicy for RandomPolicy {
    fn id(&self) -> String {
        "random".into()
    }

    fn reset(&mut self) {}

    fn observe(&mut self, _out: &DetectorOutput) {}

    fn propose(&mut self, _current: Vec2, rng: &mut dyn RngCore) -> Vec2 {
        action_to_deg([rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
    }
}

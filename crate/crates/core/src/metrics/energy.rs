use serde::{Deserialize, Serialize};

use crate::agent::SpikingPolicy;
use crate::agent::rnn_input;
use crate::error::{Error, Result};

/// Per-operation energy costs (pJ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub e_flop: f64,
    pub e_sop: f64,
    pub e_spike: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { e_flop: 12.5, e_sop: 0.077, e_spike: 3.7 }
    }
}

/// Spikes emitted by a layer and the synaptic events they trigger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerActivity {
    pub name: String,
    pub spikes: u64,
    pub sops: u64,
    pub neuron_steps: u64,
}

impl LayerActivity {
    pub fn rate(&self) -> f64 {
        if self.neuron_steps == 0 { 0.0 } else { self.spikes as f64 / self.neuron_steps as f64 }
    }
}

impl EnergyModel {
    pub fn energy(&self, layers: &[LayerActivity]) -> f64 {
        layers.iter().map(|l| l.spikes as f64 * self.e_spike + l.sops as f64 * self.e_sop).sum()
    }

    pub fn ann_energy(&self, flops: u64) -> f64 {
        flops as f64 * self.e_flop
    }
}

/// `sum spikes * e_spike + sum spikes * fanout * e_sop` (pJ).
pub fn snn_energy(spike_counts: &[u64], fanouts: &[u64], model: &EnergyModel) -> Result<f64> {
    if spike_counts.len() != fanouts.len() {
        return Err(Error::Shape(format!("{} spike counts for {} fanouts", spike_counts.len(), fanouts.len())));
    }
    Ok(spike_counts.iter().zip(fanouts).map(|(&s, &f)| s as f64 * model.e_spike + (s * f) as f64 * model.e_sop).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Conv { c_in: u64, c_out: u64, k: u64, h_out: u64, w_out: u64 },
    Linear { n_in: u64, n_out: u64 },
}

impl Layer {
    /// Multiply-accumulate FLOPs, without the activation.
    pub fn flops(&self) -> u64 {
        match *self {
            Layer::Conv { c_in, c_out, k, h_out, w_out } => 2 * c_in * k * k * c_out * h_out * w_out,
            Layer::Linear { n_in, n_out } => 2 * n_in * n_out,
        }
    }

    pub fn outputs(&self) -> u64 {
        match *self {
            Layer::Conv { c_out, h_out, w_out, .. } => c_out * h_out * w_out,
            Layer::Linear { n_out, .. } => n_out,
        }
    }
}

/// Parse `[{"kind": "conv", ...}, {"kind": "linear", ...}]`.
pub fn parse_architecture(v: &serde_json::Value) -> Result<Vec<Layer>> {
    let items = v.as_array().ok_or_else(|| Error::Format { format: "architecture", reason: "expected a JSON array".into() })?;
    items
        .iter()
        .map(|item| {
            let kind = item.get("kind").and_then(|k| k.as_str()).unwrap_or("");
            if !matches!(kind, "conv" | "linear") {
                return Err(Error::UnknownLayer(kind.to_string()));
            }
            serde_json::from_value(item.clone()).map_err(|e| Error::Format { format: "architecture", reason: e.to_string() })
        })
        .collect()
}

/// Total FLOPs of a network: layer products plus one per output activation,
/// with a leading convolution left out.
pub fn ann_flops(layers: &[Layer]) -> u64 {
    let skip = usize::from(matches!(layers.first(), Some(Layer::Conv { .. })));
    layers.iter().skip(skip).map(|l| l.flops() + l.outputs()).sum()
}

/// The memory and actor as a dense network with the same shapes.
pub fn policy_as_ann(policy: &SpikingPolicy) -> Vec<Layer> {
    let r = &policy.rnn;
    let a = &policy.actor;
    let lin = |l: &crate::snn::Linear| Layer::Linear { n_in: l.n_in as u64, n_out: l.n_out as u64 };
    vec![lin(&r.w_xr), lin(&r.w_rr), lin(&a.l1.linear), lin(&a.l2.linear), lin(&a.readout.linear)]
}

/// Count spikes and synaptic events of the policy while it observes each
/// sequence of fixation estimates (deg).
pub fn policy_activity(policy: &SpikingPolicy, sequences: &[Vec<crate::geom::Vec2>]) -> Vec<LayerActivity> {
    let (hid, n1, n2) = (policy.rnn.hidden() as u64, policy.actor.l1.size() as u64, policy.actor.l2.size() as u64);
    let mut rnn = LayerActivity { name: "rnn".into(), spikes: 0, sops: 0, neuron_steps: 0 };
    let mut l1 = LayerActivity { name: "actor.l1".into(), spikes: 0, sops: 0, neuron_steps: 0 };
    let mut l2 = LayerActivity { name: "actor.l2".into(), spikes: 0, sops: 0, neuron_steps: 0 };
    let count = |s: &[Vec<f64>]| s.iter().flatten().filter(|&&v| v != 0.0).count() as u64;
    for seq in sequences {
        let mut h = policy.rnn.zero_state();
        for (i, &fix) in seq.iter().enumerate() {
            let out = crate::agent::DetectorOutput { fix_loc_pred_deg: fix, target_rel_pred_deg: crate::geom::Vec2::ZERO, err_est_deg: f64::INFINITY };
            let step = policy.rnn.fixation(&rnn_input(&out, policy.time_steps), &h);
            let tr = policy.actor.forward(&step.spikes);
            let t = step.spikes.len() as u64;
            let rs = count(&step.spikes);
            let last = count(std::slice::from_ref(&step.spikes[step.spikes.len() - 1]));
            rnn.spikes += rs;
            // Every spike reaches the first actor layer; the last step's spikes
            // also drive the recurrent weights at the next fixation.
            rnn.sops += rs * n1 + if i + 1 < seq.len() { last * hid } else { 0 };
            rnn.neuron_steps += t * hid;
            let s1 = count(&tr.s1);
            l1.spikes += s1;
            l1.sops += s1 * n2;
            l1.neuron_steps += t * n1;
            let s2 = count(&tr.s2);
            l2.spikes += s2;
            l2.sops += s2 * policy.actor.readout.linear.n_out as u64;
            l2.neuron_steps += t * n2;
            h = step.h_next().to_vec();
        }
    }
    vec![rnn, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    #[test]
    fn worked_examples() {
        let conv = Layer::Conv { c_in: 1, c_out: 16, k: 7, h_out: 112, w_out: 112 };
        assert_eq!(conv.flops(), 19_668_992);
        assert_eq!(Layer::Linear { n_in: 448, n_out: 5 }.flops(), 4_480);
        assert_eq!(ann_flops(&[]), 0);
        // The leading convolution does not count.
        let lin = Layer::Linear { n_in: 448, n_out: 5 };
        assert_eq!(ann_flops(&[conv, lin]), 4_480 + 5);
        assert_eq!(ann_flops(&[lin, conv]), 4_485 + 19_668_992 + 16 * 112 * 112);
    }

    #[test]
    fn energy_examples() {
        let m = EnergyModel::default();
        assert_eq!(snn_energy(&[0, 0], &[10, 20], &m).unwrap(), 0.0);
        assert!((snn_energy(&[1], &[100], &m).unwrap() - 11.4).abs() < 1e-12);
        assert!(snn_energy(&[1, 2], &[3], &m).is_err());
    }

    #[test]
    fn parse_rejects_unknown_kinds() {
        let a = parse_architecture(&json!([{"kind": "linear", "n_in": 3, "n_out": 2}, {"kind": "conv", "c_in": 1, "c_out": 2, "k": 3, "h_out": 4, "w_out": 4}])).unwrap();
        assert_eq!(a.len(), 2);
        match parse_architecture(&json!([{"kind": "pool", "size": 2}])) {
            Err(Error::UnknownLayer(k)) => assert_eq!(k, "pool"),
            other => panic!("{other:?}"),
        }
        assert!(parse_architecture(&json!([{"kind": "linear", "n_in": 3}])).is_err());
    }

    #[test]
    fn activity_matches_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = SpikingPolicy::init(16, 24, &mut rng);
        let seq = vec![vec![crate::geom::Vec2::new(1.0, -2.0), crate::geom::Vec2::new(-3.0, 0.5)]];
        let act = policy_activity(&p, &seq);
        assert_eq!(act[0].neuron_steps, 2 * 4 * 16);
        assert_eq!(act[1].neuron_steps, 2 * 4 * 24);
        assert!(act[0].spikes > 0);
        assert!(act[0].sops >= act[0].spikes * 24);
        let e = EnergyModel::default().energy(&act);
        let direct: f64 = act.iter().map(|a| a.spikes as f64 * 3.7 + a.sops as f64 * 0.077).sum();
        assert_eq!(e, direct);
    }
}

use std::collections::HashMap;
use std::path::Path;

use serde_json::{Map, Value, json};

use crate::agent::{ActorNet, SpikingPolicy};
use crate::error::{Error, Result};
use crate::snn::{IfLayer, IfNeurons, Linear, Manifest, PopulationReadout, SpikingRnn, load_checkpoint, save_checkpoint};

type Tensor = (String, Vec<usize>, Vec<f64>, Option<f64>);

fn push_linear(out: &mut Vec<Tensor>, name: &str, l: &Linear, lambda: Option<f64>) {
    out.push((format!("{name}.w"), vec![l.n_out, l.n_in], l.w.clone(), lambda));
    out.push((format!("{name}.b"), vec![l.n_out], l.b.clone(), lambda));
}

/// Write the memory and actor weights in the checkpoint manifest format.
pub fn save_policy(dir: &Path, policy: &SpikingPolicy, mut meta: Map<String, Value>) -> Result<Manifest> {
    let mut t = Vec::new();
    push_linear(&mut t, "rnn.w_xr", &policy.rnn.w_xr, Some(policy.rnn.neurons.lambda));
    push_linear(&mut t, "rnn.w_rr", &policy.rnn.w_rr, Some(policy.rnn.neurons.lambda));
    push_linear(&mut t, "actor.l1", &policy.actor.l1.linear, Some(policy.actor.l1.neurons.lambda));
    push_linear(&mut t, "actor.l2", &policy.actor.l2.linear, Some(policy.actor.l2.neurons.lambda));
    push_linear(&mut t, "actor.readout", &policy.actor.readout.linear, None);
    meta.insert("time_steps".into(), json!(policy.time_steps));
    meta.insert("threshold".into(), json!(policy.rnn.neurons.threshold));
    meta.insert("v_init".into(), json!(policy.rnn.neurons.v_init));
    save_checkpoint(dir, &t, meta)
}

pub fn load_policy(dir: &Path) -> Result<(SpikingPolicy, Manifest)> {
    let (manifest, data) = load_checkpoint(dir)?;
    let tensors: HashMap<String, Vec<f64>> = data.into_iter().collect();
    let bad = |reason: String| Error::Format { format: "checkpoint", reason };
    let shape = |name: &str| manifest.layers.iter().find(|l| l.name == name).map(|l| (l.shape.clone(), l.lambda));
    let linear = |name: &str| -> Result<(Linear, Option<f64>)> {
        let (s, lambda) = shape(&format!("{name}.w")).ok_or_else(|| bad(format!("missing {name}.w")))?;
        if s.len() != 2 {
            return Err(bad(format!("{name}.w must be 2-D")));
        }
        let w = tensors[&format!("{name}.w")].clone();
        let b = tensors.get(&format!("{name}.b")).cloned().ok_or_else(|| bad(format!("missing {name}.b")))?;
        if b.len() != s[0] {
            return Err(bad(format!("{name}.b has {} entries, expected {}", b.len(), s[0])));
        }
        Ok((Linear { n_in: s[1], n_out: s[0], w, b }, lambda))
    };
    let num = |k: &str, d: f64| manifest.meta.get(k).and_then(Value::as_f64).unwrap_or(d);
    let base = IfNeurons::default();
    let neurons = |lambda: Option<f64>| IfNeurons { lambda: lambda.unwrap_or(base.lambda), threshold: num("threshold", base.threshold), v_init: num("v_init", base.v_init), ..base };
    let (w_xr, lam_r) = linear("rnn.w_xr")?;
    let (w_rr, _) = linear("rnn.w_rr")?;
    let (l1, lam1) = linear("actor.l1")?;
    let (l2, lam2) = linear("actor.l2")?;
    let (ro, _) = linear("actor.readout")?;
    if w_rr.n_in != w_xr.n_out || w_rr.n_out != w_xr.n_out || l1.n_in != w_xr.n_out || l2.n_in != l1.n_out || ro.n_in != l2.n_out || ro.n_out != 5 {
        return Err(bad("layer sizes do not chain".into()));
    }
    let rnn = SpikingRnn { w_xr, w_rr, neurons: neurons(lam_r) };
    let actor = ActorNet { l1: IfLayer::new(l1, neurons(lam1)), l2: IfLayer::new(l2, neurons(lam2)), readout: PopulationReadout::new(ro) };
    let time_steps = num("time_steps", crate::snn::DEFAULT_TIME_STEPS as f64) as usize;
    Ok((SpikingPolicy::new(rnn, actor, time_steps), manifest))
}

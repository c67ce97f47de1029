#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsearch_core::agent::{ActorGrad, ActorNet};
use vsearch_core::rl::{ActorSample, CriticGrad, CriticNet, SacConfig, StoredTrial, Transition, actor_objective, critic_objective, trial_inputs};
use vsearch_core::snn::{IfNeurons, Linear, LinearGrad, RnnGrad, SpikeFn, SpikingRnn};

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

pub struct GradCheck {
    pub actor_max_rel: f64,
    pub rnn_max_rel: f64,
    pub critic_max_rel: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn max_rel(&self) -> f64 {
        self.actor_max_rel.max(self.rnn_max_rel).max(self.critic_max_rel)
    }
}

fn rel(fd: f64, g: f64) -> f64 {
    (fd - g).abs() / fd.abs().max(g.abs()).max(1e-5)
}

fn toy_trial() -> StoredTrial {
    StoredTrial {
        fix_pred: vec![[0.1, -0.2], [0.5, 0.3], [-0.4, 0.6], [0.2, -0.7], [0.0, 0.1]],
        target_pred: vec![[0.3, 0.3], [-0.2, 0.1], [0.6, -0.5], [0.1, 0.1], [0.05, 0.1]],
        detection: vec![false, false, true, false, true],
        actions: vec![[0.4, -0.1], [-0.3, 0.2], [0.1, 0.6], [-0.5, -0.5]],
        rewards: vec![-0.3, -0.5, -0.2, -0.1],
    }
}

fn nth(ls: Vec<&mut Linear>, mut k: usize) -> &mut f64 {
    for l in ls {
        let (nw, n) = (l.w.len(), l.w.len() + l.b.len());
        if k < n {
            return if k < nw { &mut l.w[k] } else { &mut l.b[k - nw] };
        }
        k -= n;
    }
    panic!("parameter index out of range")
}

fn flat(gs: &[&LinearGrad]) -> Vec<f64> {
    gs.iter().flat_map(|g| g.w.iter().chain(&g.b).copied()).collect()
}

fn actor_ls(a: &mut ActorNet) -> Vec<&mut Linear> {
    vec![&mut a.l1.linear, &mut a.l2.linear, &mut a.readout.linear]
}

/// Largest relative error between `grad` and central differences of `loss`
/// over every parameter of `net` reached through `ls`.
fn check<N: Clone>(net: &N, grad: &[f64], ls: impl Fn(&mut N) -> Vec<&mut Linear>, loss: impl Fn(&N) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, &g) in grad.iter().enumerate() {
        let (mut p, mut m) = (net.clone(), net.clone());
        *nth(ls(&mut p), k) += h;
        *nth(ls(&mut m), k) -= h;
        worst = worst.max(rel((loss(&p) - loss(&m)) / (2.0 * h), g));
    }
    worst
}

/// Analytic vs central-difference gradients on an 8-unit network with the
/// smooth spike function, for the actor loss and for the TD loss (memory and
/// critic parameters).
pub fn toy_gradient_check(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neurons = IfNeurons { spike_fn: SpikeFn::SmoothAtan, ..Default::default() };
    let mut rnn = SpikingRnn::init(2, 8, neurons, &mut rng);
    rnn.w_xr.w.iter_mut().for_each(|w| *w *= 2.0);
    let actor = ActorNet::init(8, 8, neurons, &mut rng);
    let cfg = SacConfig { critic_hidden: 12, ..SacConfig::hp(2) };
    let critics = [CriticNet::init(8, &cfg, &mut rng), CriticNet::init(8, &cfg, &mut rng)];
    let trial = toy_trial();
    let last = trial.fixations() - 1;
    let t_steps = 4;
    let eps = [[0.3, -0.8], [1.1, 0.2], [-0.6, -0.4], [0.05, 0.9]];
    let alpha = 0.7;

    let steps = rnn.unroll(&trial_inputs(&trial, last, t_steps));
    let batch: Vec<ActorSample> = (0..4).map(|l| ActorSample { spikes: steps[l].spikes.clone(), h: steps[l].mean_output(), eps: eps[l] }).collect();
    let mut ag = ActorGrad::zeros(&actor);
    actor_objective(&actor, &critics, alpha, &batch, Some(&mut ag));
    let actor_max_rel = check(&actor, &flat(&[&ag.l1, &ag.l2, &ag.readout]), actor_ls, |a| actor_objective(a, &critics, alpha, &batch, None).0);

    let targets = [-0.8, -0.4, 0.3, -1.2];
    let td_loss = |rnn: &SpikingRnn, c: &[CriticNet; 2]| -> f64 {
        let steps = rnn.unroll(&trial_inputs(&trial, last, t_steps));
        let batch: Vec<Transition> = (0..4).map(|l| Transition { trial: &trial, index: l, target: targets[l], steps: &steps }).collect();
        critic_objective(rnn, c, &batch, None)
    };
    let tbatch: Vec<Transition> = (0..4).map(|l| Transition { trial: &trial, index: l, target: targets[l], steps: &steps }).collect();
    let mut cg = [CriticGrad::zeros(&critics[0]), CriticGrad::zeros(&critics[1])];
    let mut rg = RnnGrad::zeros(&rnn);
    critic_objective(&rnn, &critics, &tbatch, Some((&mut cg, &mut rg)));
    let rnn_max_rel = check(&rnn, &flat(&[&rg.w_xr, &rg.w_rr]), |r| vec![&mut r.w_xr, &mut r.w_rr], |r| td_loss(r, &critics));
    let critic_max_rel = (0..2)
        .map(|c| {
            check(&critics, &flat(&cg[c].linears()), |cs| cs[c].linears_mut(), |cs| td_loss(&rnn, cs))
        })
        .fold(0.0, f64::max);

    let checked = flat(&[&ag.l1, &ag.l2, &ag.readout]).len() + flat(&[&rg.w_xr, &rg.w_rr]).len() + 2 * flat(&cg[0].linears()).len();
    GradCheck { actor_max_rel, rnn_max_rel, critic_max_rel, checked }
}

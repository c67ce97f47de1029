use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::{Adam, clip_grad_norm, polyak};
use super::mlp::{CRITIC_HIDDEN, LEAKY_SLOPE, Mlp, MlpGrad};
use super::replay::{ReplayBuffer, StoredTrial};
use crate::agent::head::{head_backward, sample_head};
use crate::agent::{ActorGrad, ActorNet, SpikingPolicy};
use crate::error::{Error, Result};
use crate::snn::{Linear, LinearGrad, RnnGrad, RnnStep, SpikingRnn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub gamma: f64,
    pub entropy_target: f64,
    pub init_alpha: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_alpha: f64,
    pub lr_critic: f64,
    pub lr_rnn: f64,
    pub tau: f64,
    pub warmup_trials: usize,
    pub max_trials: usize,
    pub grad_clip: f64,
    pub critic_hidden: usize,
    pub leaky_slope: f64,
    /// Hidden layers of the head that values saccades made after a detection.
    pub det_head_depth: usize,
    /// Hidden layers of the head that values policy saccades.
    pub pol_head_depth: usize,
}

impl SacConfig {
    /// Settings for reward preset 1 or 2 (they differ in the entropy target).
    pub fn hp(hp: u8) -> Self {
        let entropy_target = if hp == 1 { -1.0 } else { -2.0 };
        Self {
            gamma: 0.95,
            entropy_target,
            init_alpha: 1.0,
            replay_capacity: 50_000,
            batch_size: 32,
            lr_actor: 1e-4,
            lr_alpha: 1e-4,
            lr_critic: 1e-3,
            lr_rnn: 1e-3,
            tau: 0.005,
            warmup_trials: 333,
            max_trials: 5_000,
            grad_clip: 1.0,
            critic_hidden: CRITIC_HIDDEN,
            leaky_slope: LEAKY_SLOPE,
            det_head_depth: 2,
            pol_head_depth: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.init_alpha, self.lr_actor, self.lr_alpha, self.lr_critic, self.lr_rnn, self.tau, self.grad_clip];
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && pos.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.tau <= 1.0
            && self.replay_capacity > 0
            && self.batch_size > 0
            && self.critic_hidden > 0
            && self.entropy_target.is_finite();
        if ok { Ok(()) } else { Err(Error::Config("SAC settings out of range".into())) }
    }
}

impl Default for SacConfig {
    fn default() -> Self {
        Self::hp(2)
    }
}

/// Non-spiking critic with one head per saccade source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    /// Q(action, predicted target) after a detection.
    pub det: Mlp,
    /// Q(action, mean memory output) for policy saccades.
    pub pol: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticGrad {
    pub det: MlpGrad,
    pub pol: MlpGrad,
}

impl CriticGrad {
    pub fn zeros(c: &CriticNet) -> Self {
        Self { det: MlpGrad::zeros(&c.det), pol: MlpGrad::zeros(&c.pol) }
    }

    pub fn linears_mut(&mut self) -> Vec<&mut LinearGrad> {
        self.det.layers.iter_mut().chain(self.pol.layers.iter_mut()).collect()
    }

    pub fn linears(&self) -> Vec<&LinearGrad> {
        self.det.layers.iter().chain(&self.pol.layers).collect()
    }
}

pub fn det_input(a: [f64; 2], target: [f64; 2]) -> Vec<f64> {
    vec![a[0], a[1], target[0], target[1]]
}

pub fn pol_input(a: [f64; 2], h: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 + h.len());
    x.extend_from_slice(&a);
    x.extend_from_slice(h);
    x
}

impl CriticNet {
    pub fn init<R: Rng + ?Sized>(memory_units: usize, cfg: &SacConfig, rng: &mut R) -> Self {
        Self {
            det: Mlp::init(4, cfg.critic_hidden, cfg.det_head_depth, cfg.leaky_slope, rng),
            pol: Mlp::init(2 + memory_units, cfg.critic_hidden, cfg.pol_head_depth, cfg.leaky_slope, rng),
        }
    }

    pub fn linears(&self) -> Vec<&Linear> {
        self.det.layers.iter().chain(&self.pol.layers).collect()
    }

    pub fn linears_mut(&mut self) -> Vec<&mut Linear> {
        self.det.layers.iter_mut().chain(self.pol.layers.iter_mut()).collect()
    }
}

fn rnn_linears(r: &SpikingRnn) -> Vec<&Linear> {
    vec![&r.w_xr, &r.w_rr]
}

fn rnn_linears_mut(r: &mut SpikingRnn) -> Vec<&mut Linear> {
    vec![&mut r.w_xr, &mut r.w_rr]
}

fn actor_linears_mut(a: &mut ActorNet) -> Vec<&mut Linear> {
    vec![&mut a.l1.linear, &mut a.l2.linear, &mut a.readout.linear]
}

fn actor_grads(g: &ActorGrad) -> Vec<&LinearGrad> {
    vec![&g.l1, &g.l2, &g.readout]
}

fn all_finite(gs: &[&LinearGrad]) -> bool {
    gs.iter().all(|g| g.is_finite())
}

/// Memory inputs for fixations `0..=upto` of a stored trial.
pub fn trial_inputs(trial: &StoredTrial, upto: usize, time_steps: usize) -> Vec<Vec<Vec<f64>>> {
    trial.fix_pred[..=upto].iter().map(|p| vec![p.to_vec(); time_steps]).collect()
}

/// A sampled transition with its TD target and the online memory unrolled
/// over fixations `0..=index` (computed with the same network being scored).
pub struct Transition<'a> {
    pub trial: &'a StoredTrial,
    pub index: usize,
    pub target: f64,
    pub steps: &'a [RnnStep],
}

/// Mean over the batch of the twin-critic squared TD errors (halved).
/// Gradients flow into both critics and, through time, into the memory.
pub fn critic_objective(rnn: &SpikingRnn, critics: &[CriticNet; 2], batch: &[Transition], mut grads: Option<(&mut [CriticGrad; 2], &mut RnnGrad)>) -> f64 {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for tr in batch {
        let (l, trial) = (tr.index, tr.trial);
        let a = trial.actions[l];
        if trial.detection[l] {
            let x = det_input(a, trial.target_pred[l]);
            for k in 0..2 {
                let (q, t) = critics[k].det.forward(&x);
                let e = q - tr.target;
                loss += 0.5 * e * e / n;
                if let Some((g, _)) = grads.as_mut() {
                    critics[k].det.backward(&t, e / n, Some(&mut g[k].det));
                }
            }
        } else {
            let step = &tr.steps[l];
            let h = step.mean_output();
            let x = pol_input(a, &h);
            let mut dh = vec![0.0; h.len()];
            for k in 0..2 {
                let (q, t) = critics[k].pol.forward(&x);
                let e = q - tr.target;
                loss += 0.5 * e * e / n;
                if let Some((g, _)) = grads.as_mut() {
                    let dx = critics[k].pol.backward(&t, e / n, Some(&mut g[k].pol));
                    dh.iter_mut().zip(&dx[2..]).for_each(|(d, v)| *d += v);
                }
            }
            if let Some((_, rg)) = grads.as_mut() {
                let steps_t = step.spikes.len() as f64;
                let mut d_spikes: Vec<Vec<Vec<f64>>> = tr.steps[..=l].iter().map(|s| vec![vec![0.0; h.len()]; s.spikes.len()]).collect();
                for d in d_spikes[l].iter_mut() {
                    d.iter_mut().zip(&dh).for_each(|(a, b)| *a = b / steps_t);
                }
                rnn.backward_sequence(&tr.steps[..=l], &d_spikes, rg);
            }
        }
    }
    loss
}

/// Actor input: memory spikes for one fixation, their mean, and fixed noise.
#[derive(Clone, Debug)]
pub struct ActorSample {
    pub spikes: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub eps: [f64; 2],
}

/// Mean of `alpha log pi(a|s) - min_k Q_k(s, a)` with reparameterised actions.
/// Returns the loss and the mean log-probability.
pub fn actor_objective(actor: &ActorNet, critics: &[CriticNet; 2], alpha: f64, batch: &[ActorSample], mut grad: Option<&mut ActorGrad>) -> (f64, f64) {
    let n = batch.len() as f64;
    let (mut loss, mut logp) = (0.0, 0.0);
    for s in batch {
        let tr = actor.forward(&s.spikes);
        let hs = sample_head(&tr.out, s.eps);
        let x = pol_input(hs.a, &s.h);
        let (q0, t0) = critics[0].pol.forward(&x);
        let (q1, t1) = critics[1].pol.forward(&x);
        let (q, k, t) = if q0 <= q1 { (q0, 0, t0) } else { (q1, 1, t1) };
        loss += (alpha * hs.log_prob - q) / n;
        logp += hs.log_prob / n;
        if let Some(g) = grad.as_deref_mut() {
            let dx = critics[k].pol.backward(&t, -1.0 / n, None);
            let d_out = head_backward(&tr.out, &hs, [dx[0], dx[1]], alpha / n);
            actor.backward(&s.spikes, &tr, &d_out, g);
        }
    }
    (loss, logp)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    /// Mean `-log pi` of the reparameterised batch actions.
    pub entropy: f64,
    pub critic_grad_norm: f64,
    pub rnn_grad_norm: f64,
}

/// Spiking memory and actor, twin critics with targets, and the temperature.
#[derive(Clone, Debug)]
pub struct SacAgent {
    pub config: SacConfig,
    pub policy: SpikingPolicy,
    pub rnn_target: SpikingRnn,
    pub critics: [CriticNet; 2],
    pub targets: [CriticNet; 2],
    pub log_alpha: f64,
    pub updates: u64,
    pub skipped_updates: u64,
    opt_actor: Adam,
    opt_rnn: Adam,
    opt_critic: Adam,
    opt_alpha: Adam,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(config: SacConfig, policy: SpikingPolicy, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let units = policy.rnn.hidden();
        let critics = [CriticNet::init(units, &config, rng), CriticNet::init(units, &config, rng)];
        Ok(Self {
            opt_actor: Adam::new(config.lr_actor),
            opt_rnn: Adam::new(config.lr_rnn),
            opt_critic: Adam::new(config.lr_critic),
            opt_alpha: Adam::new(config.lr_alpha),
            log_alpha: config.init_alpha.ln(),
            rnn_target: policy.rnn.clone(),
            targets: critics.clone(),
            critics,
            policy,
            config,
            updates: 0,
            skipped_updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    fn soft_value_next(&self, trial: &StoredTrial, next: usize, online_next: &RnnStep, rng: &mut dyn RngCore) -> f64 {
        if next + 1 == trial.fixations() {
            return 0.0;
        }
        if trial.detection[next] {
            let x = det_input(trial.actions[next], trial.target_pred[next]);
            return self.targets[0].det.value(&x).min(self.targets[1].det.value(&x));
        }
        let eps = [StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)];
        let hs = sample_head(&self.policy.actor.forward(&online_next.spikes).out, eps);
        let targ = self.rnn_target.unroll(&trial_inputs(trial, next, self.policy.time_steps));
        let x = pol_input(hs.a, &targ[next].mean_output());
        self.targets[0].pol.value(&x).min(self.targets[1].pol.value(&x)) - self.alpha() * hs.log_prob
    }
}

/// One optimisation step on a batch of trials drawn from `buffer` (one random
/// transition per trial). Returns `None` when the buffer is empty or the step
/// was skipped because a loss or gradient was not finite.
pub fn sac_update<R: Rng>(agent: &mut SacAgent, buffer: &ReplayBuffer<StoredTrial>, rng: &mut R) -> Option<UpdateStats> {
    if buffer.is_empty() {
        return None;
    }
    let cfg = agent.config.clone();
    let t_steps = agent.policy.time_steps;
    let mut picks: Vec<(&StoredTrial, usize)> = Vec::with_capacity(cfg.batch_size);
    while picks.len() < cfg.batch_size {
        let (_, trial) = buffer.sample(rng)?;
        if trial.transitions() > 0 {
            picks.push((trial, rng.random_range(0..trial.transitions())));
        } else if buffer.len() == 1 {
            return None;
        }
    }
    let unrolled: Vec<Vec<RnnStep>> = picks.iter().map(|&(t, l)| agent.policy.rnn.unroll(&trial_inputs(t, l + 1, t_steps))).collect();
    let mut batch = Vec::with_capacity(picks.len());
    let mut actor_batch = Vec::with_capacity(picks.len());
    for (&(trial, l), steps) in picks.iter().zip(&unrolled) {
        let v_next = agent.soft_value_next(trial, l + 1, &steps[l + 1], rng);
        batch.push(Transition { trial, index: l, target: trial.rewards[l] + cfg.gamma * v_next, steps });
        let eps = [StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)];
        actor_batch.push(ActorSample { spikes: steps[l].spikes.clone(), h: steps[l].mean_output(), eps });
    }

    let mut cg = [CriticGrad::zeros(&agent.critics[0]), CriticGrad::zeros(&agent.critics[1])];
    let mut rg = RnnGrad::zeros(&agent.policy.rnn);
    let critic_loss = critic_objective(&agent.policy.rnn, &agent.critics, &batch, Some((&mut cg, &mut rg)));
    let mut ag = ActorGrad::zeros(&agent.policy.actor);
    let alpha = agent.alpha();
    let (actor_loss, mean_logp) = actor_objective(&agent.policy.actor, &agent.critics, alpha, &actor_batch, Some(&mut ag));
    // d/d(log alpha) of -log alpha * (log pi + target).
    let alpha_grad = -(mean_logp + cfg.entropy_target);

    let grads_ok = all_finite(&cg[0].linears()) && all_finite(&cg[1].linears()) && all_finite(&[&rg.w_xr, &rg.w_rr]) && all_finite(&actor_grads(&ag));
    if !(critic_loss.is_finite() && actor_loss.is_finite() && alpha_grad.is_finite() && grads_ok) {
        agent.skipped_updates += 1;
        return None;
    }

    let [c0, c1] = &mut cg;
    let critic_grad_norm = clip_grad_norm(c0.linears_mut().into_iter().chain(c1.linears_mut()).collect(), cfg.grad_clip);
    let rnn_grad_norm = clip_grad_norm(vec![&mut rg.w_xr, &mut rg.w_rr], cfg.grad_clip);

    let [q0, q1] = &mut agent.critics;
    agent.opt_critic.step_linears(q0.linears_mut().into_iter().chain(q1.linears_mut()).collect(), cg[0].linears().into_iter().chain(cg[1].linears()).collect());
    agent.opt_rnn.step_linears(rnn_linears_mut(&mut agent.policy.rnn), vec![&rg.w_xr, &rg.w_rr]);
    agent.opt_actor.step_linears(actor_linears_mut(&mut agent.policy.actor), actor_grads(&ag));
    let mut la = [agent.log_alpha];
    agent.opt_alpha.step(&mut [&mut la], &[&[alpha_grad]]);
    agent.log_alpha = la[0];

    for k in 0..2 {
        polyak(agent.targets[k].linears_mut(), agent.critics[k].linears(), cfg.tau);
    }
    polyak(rnn_linears_mut(&mut agent.rnn_target), rnn_linears(&agent.policy.rnn), cfg.tau);
    agent.updates += 1;
    Some(UpdateStats { critic_loss, actor_loss, alpha: agent.alpha(), entropy: -mean_logp, critic_grad_norm, rnn_grad_norm })
}

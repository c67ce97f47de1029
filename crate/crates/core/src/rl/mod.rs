//! Soft actor-critic training of the spiking memory and actor.

mod adam;
mod checkpoint;
mod mlp;
mod replay;
mod sac;
mod train;

pub use adam::{Adam, clip_grad_norm, grad_norm, polyak};
pub use checkpoint::{load_policy, save_policy};
pub use mlp::{CRITIC_HIDDEN, LEAKY_SLOPE, Mlp, MlpGrad, MlpTrace};
pub use replay::{ReplayBuffer, StoredTrial};
pub use sac::{
    ActorSample, CriticGrad, CriticNet, SacAgent, SacConfig, Transition, UpdateStats, actor_objective, critic_objective, det_input, pol_input, sac_update,
    trial_inputs,
};
pub use train::{CurvePoint, DivergenceMonitor, DivergenceRule, TrainConfig, TrainResult, decile_returns, random_baseline_return, train};

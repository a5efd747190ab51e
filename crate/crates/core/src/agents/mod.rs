//! Learning-based autoscalers: tabular SARSA(λ) and Double DQN.

pub mod discretize;
pub mod dqn;
pub mod mlp;
pub mod replay;
pub mod sarsa;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::FarmEnv;
use crate::error::Result;
use crate::metrics::final_qos;
use crate::rng::SimRng;
use crate::types::{EpisodeConfig, Observation, ScalingAction};

pub use discretize::{Discretizer, StateKey};
pub use dqn::{DqnAgent, DqnConfig};
pub use mlp::{Adam, Mlp};
pub use replay::{ReplayBuffer, StoredTransition};
pub use sarsa::{QTable, SarsaAgent, SarsaConfig, TraceTable};

/// Index of the largest value; ties go to the largest index.
pub fn argmax_last(values: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if values[i] >= values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform action index, otherwise the greedy one.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64; 3], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..3)
    } else {
        argmax_last(values)
    }
}

/// Multiplicative decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub min: f64,
    pub decay: f64,
}

impl EpsilonSchedule {
    pub fn next(&self, eps: f64) -> f64 {
        (eps * self.decay).max(self.min)
    }

    pub fn at(&self, episode: usize) -> f64 {
        let mut e = self.start;
        for _ in 0..episode {
            e = self.next(e);
        }
        e
    }
}

/// Per-dimension observation bounds used for min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsBounds {
    pub lo: [f64; 9],
    pub hi: [f64; 9],
}

impl ObsBounds {
    /// Bounds implied by an episode configuration. Queue lengths are capped at
    /// `queue_cap`; service times at `max_service`.
    pub fn for_episode(cfg: &EpisodeConfig, queue_cap: f64, max_service: f64) -> Self {
        let peak_rate = cfg
            .phases
            .iter()
            .map(|p| {
                p.base_rate
                    * match p.kind {
                        crate::workload::PhaseKind::Steady { multiplier } => multiplier,
                        crate::workload::PhaseKind::Sinusoid { mult_max, .. } => mult_max,
                    }
            })
            .fold(1.0, f64::max);
        let steps_per_window = cfg.obs_window as f64 * cfg.step_duration;
        ObsBounds {
            lo: [0.0; 9],
            hi: [
                queue_cap,
                queue_cap,
                queue_cap,
                queue_cap.max(peak_rate * cfg.step_duration),
                cfg.n_max as f64,
                max_service,
                max_service,
                (peak_rate * 1.5).max(1.0 / steps_per_window),
                1.0,
            ],
        }
    }

    pub fn normalize(&self, obs: &Observation) -> [f64; 9] {
        let raw = obs.to_array();
        let mut out = [0.0; 9];
        for i in 0..9 {
            let span = self.hi[i] - self.lo[i];
            out[i] = if span > 0.0 { ((raw[i] - self.lo[i]) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: ScalingAction,
    pub reward: f64,
    pub next_obs: Observation,
    /// On-policy action already chosen in `next_obs`; `None` when terminal.
    pub next_action: Option<ScalingAction>,
    pub terminal: bool,
}

/// Shared interface of the learning controllers.
pub trait Agent {
    fn begin_episode(&mut self);
    fn act(&mut self, obs: &Observation, explore: bool, rng: &mut SimRng) -> ScalingAction;
    /// Returns the training loss when a gradient step was taken.
    fn learn(&mut self, t: &Transition, rng: &mut SimRng) -> Option<f64>;
    fn end_episode(&mut self);
    fn epsilon(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub episode: usize,
    pub final_qos: f64,
    pub max_workers: f64,
    pub scaling_actions: usize,
    pub total_reward: f64,
    /// Exploration rate used during the episode.
    pub epsilon: f64,
    pub steps: usize,
}

/// Runs `episodes` training episodes. `make_env` builds the environment of
/// each episode (fresh workload and seed).
pub fn train<A, F>(agent: &mut A, mut make_env: F, episodes: usize, rng: &mut SimRng) -> Result<Vec<TrainingRecord>>
where
    A: Agent,
    F: FnMut(usize) -> Result<(FarmEnv, Observation)>,
{
    let mut records = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let (mut env, mut obs) = make_env(episode)?;
        let eps = agent.epsilon();
        agent.begin_episode();
        let mut action = agent.act(&obs, true, rng);
        loop {
            let step = env.step(action)?;
            let next_action = if step.terminated { None } else { Some(agent.act(&step.observation, true, rng)) };
            agent.learn(
                &Transition {
                    obs,
                    action,
                    reward: step.reward,
                    next_obs: step.observation,
                    next_action,
                    terminal: step.terminated,
                },
                rng,
            );
            obs = step.observation;
            match next_action {
                Some(a) => action = a,
                None => break,
            }
        }
        agent.end_episode();
        let log = env.log();
        records.push(TrainingRecord {
            episode,
            final_qos: final_qos(log),
            max_workers: log.worker_series().into_iter().fold(0.0, f64::max),
            scaling_actions: log.steps.iter().filter(|s| s.applied_delta != 0).count(),
            total_reward: log.total_reward(),
            epsilon: eps,
            steps: log.steps.len(),
        });
    }
    Ok(records)
}

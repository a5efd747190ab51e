//! Double DQN with a soft-updated target network.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mlp::{clip_grad_norm, smooth_l1, smooth_l1_grad, Adam, Mlp};
use super::replay::{ReplayBuffer, StoredTransition};
use super::{argmax_last, epsilon_greedy, Agent, EpsilonSchedule, ObsBounds, Transition};
use crate::error::{invalid, Result};
use crate::rng::SimRng;
use crate::types::{Observation, ScalingAction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first gradient step.
    pub warmup: usize,
    pub tau: f64,
    pub grad_clip: f64,
    pub reward_clip: f64,
    pub epsilon: EpsilonSchedule,
    /// Upper bound applied to queue-length observations before scaling.
    pub queue_cap: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![128, 64],
            gamma: 0.95,
            lr: 1e-3,
            batch_size: 64,
            replay_capacity: 75_000,
            warmup: 1000,
            tau: 0.01,
            grad_clip: 10.0,
            reward_clip: 100.0,
            epsilon: EpsilonSchedule { start: 0.8, min: 0.05, decay: 0.955 },
            queue_cap: 200.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hidden layers must be non-empty"));
        }
        if !unit(self.gamma) || !(self.tau > 0.0 && self.tau <= 1.0) || !(self.lr > 0.0) {
            return Err(invalid("gamma in [0, 1], tau in (0, 1] and a positive learning rate are required"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size || self.warmup > self.replay_capacity {
            return Err(invalid("batch, warm-up and replay sizes are inconsistent"));
        }
        if !(self.grad_clip > 0.0) || !(self.reward_clip > 0.0) || !(self.queue_cap > 0.0) {
            return Err(invalid("clipping bounds must be positive"));
        }
        let e = &self.epsilon;
        if !unit(e.start) || !unit(e.min) || !unit(e.decay) || e.min > e.start {
            return Err(invalid("epsilon schedule out of range"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![Observation::DIM];
        s.extend_from_slice(&self.hidden);
        s.push(3);
        s
    }
}

/// Regression target: the online network picks the next action, the target
/// network values it.
pub fn double_dqn_target(online: &Mlp, target: &Mlp, t: &StoredTransition, gamma: f64) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let q_online = online.forward(&t.next_state)?;
    let a_star = argmax_last(&[q_online[0], q_online[1], q_online[2]]);
    let q_target = target.forward(&t.next_state)?;
    Ok(t.reward + gamma * q_target[a_star])
}

/// One minibatch update of `online` followed by a soft update of `target`.
/// Returns the mean loss, or `None` while the buffer is below the warm-up size.
pub fn train_step(
    online: &mut Mlp,
    target: &mut Mlp,
    opt: &mut Adam,
    buffer: &ReplayBuffer,
    cfg: &DqnConfig,
    rng: &mut SimRng,
) -> Result<Option<f64>> {
    if buffer.len() < cfg.warmup.max(cfg.batch_size) {
        return Ok(None);
    }
    let batch = buffer.sample(cfg.batch_size, rng)?;
    let n = batch.len() as f64;
    let mut grad = vec![0.0; online.params.len()];
    let mut loss = 0.0;
    for t in batch {
        let y = double_dqn_target(online, target, t, cfg.gamma)?;
        let cache = online.forward_cached(&t.state)?;
        let a = t.action as usize;
        let r = cache.output()[a] - y;
        loss += smooth_l1(r) / n;
        let mut g_out = [0.0; 3];
        g_out[a] = smooth_l1_grad(r) / n;
        online.backward(&cache, &g_out, &mut grad);
    }
    clip_grad_norm(&mut grad, cfg.grad_clip);
    opt.step(&mut online.params, &grad);
    target.soft_update(online, cfg.tau);
    Ok(Some(loss))
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub bounds: ObsBounds,
    pub online: Mlp,
    pub target: Mlp,
    pub optimizer: Adam,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    /// Set when a forward pass produced a non-finite value.
    pub numeric_fault: bool,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, bounds: ObsBounds, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        let online = Mlp::new(&config.layer_sizes(), rng)?;
        let target = online.clone();
        let optimizer = Adam::new(online.params.len(), config.lr);
        let buffer = ReplayBuffer::new(config.replay_capacity)?;
        Ok(DqnAgent { epsilon: config.epsilon.start, config, bounds, online, target, optimizer, buffer, numeric_fault: false })
    }

    pub fn q_values(&self, obs: &Observation) -> Result<[f64; 3]> {
        let q = self.online.forward(&self.bounds.normalize(obs))?;
        Ok([q[0], q[1], q[2]])
    }
}

impl Agent for DqnAgent {
    fn begin_episode(&mut self) {}

    fn act(&mut self, obs: &Observation, explore: bool, rng: &mut SimRng) -> ScalingAction {
        let eps = if explore { self.epsilon } else { 0.0 };
        match self.q_values(obs) {
            Ok(q) => ScalingAction::ALL[epsilon_greedy(&q, eps, rng)],
            Err(_) => {
                self.numeric_fault = true;
                ScalingAction::Hold
            }
        }
    }

    fn learn(&mut self, t: &Transition, rng: &mut SimRng) -> Option<f64> {
        let c = self.config.reward_clip;
        self.buffer.push(StoredTransition {
            state: self.bounds.normalize(&t.obs),
            action: t.action.index() as u8,
            reward: t.reward.clamp(-c, c),
            next_state: self.bounds.normalize(&t.next_obs),
            terminal: t.terminal,
        });
        match train_step(&mut self.online, &mut self.target, &mut self.optimizer, &self.buffer, &self.config, rng) {
            Ok(loss) => loss,
            Err(_) => {
                self.numeric_fault = true;
                None
            }
        }
    }

    fn end_episode(&mut self) {
        self.epsilon = self.config.epsilon.next(self.epsilon);
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::types::EpisodeConfig;

    fn small_cfg() -> DqnConfig {
        DqnConfig { hidden: vec![8], batch_size: 4, replay_capacity: 32, warmup: 8, ..DqnConfig::default() }
    }

    fn stored(r: f64, terminal: bool) -> StoredTransition {
        StoredTransition { state: [0.5; 9], action: 1, reward: r, next_state: [0.25; 9], terminal }
    }

    #[test]
    fn terminal_target_is_reward() {
        let mut rng = stream_rng(1, 1);
        let net = Mlp::new(&[9, 4, 3], &mut rng).unwrap();
        assert_eq!(double_dqn_target(&net, &net, &stored(-3.0, true), 0.9).unwrap(), -3.0);
    }

    #[test]
    fn target_uses_online_argmax_and_target_value() {
        // Online prefers action 0, target values action 0 at 7 and action 2 at 100.
        let online = Mlp::from_params(&[9, 3], {
            let mut p = vec![0.0; 30];
            p[27] = 1.0;
            p
        })
        .unwrap();
        let target = Mlp::from_params(&[9, 3], {
            let mut p = vec![0.0; 30];
            p[27] = 7.0;
            p[29] = 100.0;
            p
        })
        .unwrap();
        let y = double_dqn_target(&online, &target, &stored(1.0, false), 0.5).unwrap();
        assert!((y - 4.5).abs() < 1e-12);
    }

    #[test]
    fn no_update_before_warmup() {
        let cfg = small_cfg();
        let mut rng = stream_rng(2, 2);
        let mut online = Mlp::new(&cfg.layer_sizes(), &mut rng).unwrap();
        let mut target = online.clone();
        let mut opt = Adam::new(online.params.len(), cfg.lr);
        let mut buf = ReplayBuffer::new(cfg.replay_capacity).unwrap();
        for _ in 0..7 {
            buf.push(stored(1.0, false));
        }
        let before = online.clone();
        assert_eq!(train_step(&mut online, &mut target, &mut opt, &buf, &cfg, &mut rng).unwrap(), None);
        assert_eq!(online, before);
        buf.push(stored(1.0, true));
        assert!(train_step(&mut online, &mut target, &mut opt, &buf, &cfg, &mut rng).unwrap().is_some());
        assert_ne!(online, before);
    }

    #[test]
    fn learns_constant_terminal_reward() {
        let cfg = DqnConfig { lr: 5e-3, ..small_cfg() };
        let mut rng = stream_rng(4, 4);
        let mut online = Mlp::new(&cfg.layer_sizes(), &mut rng).unwrap();
        let mut target = online.clone();
        let mut opt = Adam::new(online.params.len(), cfg.lr);
        let mut buf = ReplayBuffer::new(cfg.replay_capacity).unwrap();
        for _ in 0..16 {
            buf.push(stored(2.0, true));
        }
        for _ in 0..2000 {
            train_step(&mut online, &mut target, &mut opt, &buf, &cfg, &mut rng).unwrap();
        }
        assert!((online.forward(&[0.5; 9]).unwrap()[1] - 2.0).abs() < 0.05);
    }

    #[test]
    fn agent_clips_rewards_into_buffer() {
        let mut rng = stream_rng(6, 6);
        let bounds = ObsBounds::for_episode(&EpisodeConfig::default(), 200.0, 3.0);
        let mut agent = DqnAgent::new(small_cfg(), bounds, &mut rng).unwrap();
        let t = Transition {
            obs: Observation::default(),
            action: ScalingAction::Up,
            reward: -500.0,
            next_obs: Observation::default(),
            next_action: None,
            terminal: true,
        };
        agent.learn(&t, &mut rng);
        assert_eq!(agent.buffer.get(0).unwrap().reward, -100.0);
        agent.end_episode();
        assert!((agent.epsilon() - 0.8 * 0.955).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(DqnConfig::default().validate().is_ok());
        assert!(DqnConfig { tau: 0.0, ..DqnConfig::default() }.validate().is_err());
        assert!(DqnConfig { warmup: 100_000, ..DqnConfig::default() }.validate().is_err());
    }
}

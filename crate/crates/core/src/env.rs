//! Episodic control environment over [`FarmSim`].
//!
//! Each step applies one scaling action at the step boundary, advances the
//! simulator by `step_duration`, assembles the next observation and scores
//! the transition with the shaped reward.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_SIM};
use crate::sim::{CompletionRecord, FarmSim, Snapshot};
use crate::types::{
    EpisodeConfig, EpisodeLog, Observation, RewardConfig, RewardTerms, ScalingAction, StepRecord, TaskRecord,
    TaskSpec,
};

/// Quantities the shaped reward is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardInputs {
    /// Step QoS `q_k`.
    pub qos: f64,
    /// Worker-queue backlog `Q_k`.
    pub backlog: f64,
    /// Effective workers `N_k`.
    pub workers: f64,
    pub applied_delta: i32,
}

/// Shaped reward, term by term. The backlog penalty only charges overflow
/// above `q_queue_target`.
pub fn compute_reward(cfg: &RewardConfig, x: &RewardInputs) -> RewardTerms {
    let q = x.qos;
    let load = x.backlog / cfg.q_queue_target;
    let qos_ok = q >= cfg.q_target;
    let overflow = (load - 1.0).max(0.0);
    let idle = x.backlog <= cfg.q_idle;
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    RewardTerms {
        qos: cfg.w_qos * (q - cfg.q_target),
        backlog: -cfg.w_backlog * overflow * overflow,
        scale: -cfg.w_scale * ind(x.applied_delta != 0),
        efficiency: -cfg.w_eff * ind(idle && qos_ok) * (x.workers - cfg.n_target).max(0.0),
        justified_up: cfg.w_up * ind(x.applied_delta > 0 && (load > 1.0 || !qos_ok)),
        safe_down: cfg.w_down * ind(x.applied_delta < 0 && load <= 1.0 && qos_ok),
        stable_bonus: cfg.w_qos * ind(qos_ok && load <= 0.5),
    }
}

/// Everything a reactive controller may read besides the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlView {
    pub observation: Observation,
    pub step_duration: f64,
    /// Arrivals during the last step.
    pub arrived_last_step: usize,
    /// Mirror of the emitter's enqueue counter.
    pub enqueued_total: u64,
    pub completed_total: u64,
    pub q_work: usize,
    pub effective_workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub applied_delta: i32,
    pub terms: RewardTerms,
    pub arrived: usize,
    pub completed: usize,
    pub hits: usize,
    pub snapshot: Snapshot,
    pub completions: Vec<CompletionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct FarmEnv {
    episode: EpisodeConfig,
    reward: RewardConfig,
    sim: FarmSim,
    workload: Vec<TaskSpec>,
    step_index: usize,
    service_window: VecDeque<Vec<f64>>,
    arrival_window: VecDeque<usize>,
    last_qos: f64,
    last_arrived: usize,
    last_obs: Observation,
    terminated: bool,
    log: EpisodeLog,
    trace: bool,
}

impl FarmEnv {
    /// Builds an environment and starts its first episode.
    pub fn new(
        episode: EpisodeConfig,
        reward: RewardConfig,
        workload: &[TaskSpec],
        seed: u64,
    ) -> Result<(Self, Observation)> {
        episode.validate()?;
        reward.validate()?;
        let sim = FarmSim::new(&episode, stream_rng(seed, STREAM_SIM))?;
        let mut env = FarmEnv {
            episode,
            reward,
            sim,
            workload: Vec::new(),
            step_index: 0,
            service_window: VecDeque::new(),
            arrival_window: VecDeque::new(),
            last_qos: 1.0,
            last_arrived: 0,
            last_obs: Observation::default(),
            terminated: false,
            log: EpisodeLog::default(),
            trace: false,
        };
        let obs = env.reset(workload, seed)?;
        Ok((env, obs))
    }

    /// Record a simulator event trace in subsequent episodes.
    pub fn set_trace(&mut self, on: bool) {
        self.trace = on;
        if on {
            self.sim.enable_trace();
        }
    }

    /// Starts a new episode; nothing carries over from the previous one.
    pub fn reset(&mut self, workload: &[TaskSpec], seed: u64) -> Result<Observation> {
        let mut sim = FarmSim::new(&self.episode, stream_rng(seed, STREAM_SIM))?;
        if self.trace {
            sim.enable_trace();
        }
        sim.inject_tasks(workload)?;
        self.sim = sim;
        self.workload = workload.to_vec();
        self.step_index = 0;
        self.service_window.clear();
        self.arrival_window.clear();
        self.last_qos = 1.0;
        self.last_arrived = 0;
        self.terminated = false;
        self.log = EpisodeLog { step_duration: self.episode.step_duration, steps: Vec::new(), tasks: Vec::new() };
        let snap = self.sim.snapshot();
        self.last_obs = Observation {
            q_in: snap.q_in as f64,
            q_work: snap.q_work as f64,
            q_res: snap.q_res as f64,
            q_out: snap.q_out as f64,
            n_workers: snap.effective_workers as f64,
            t_proc_avg: 0.0,
            t_proc_max: 0.0,
            arrival_rate: 0.0,
            qos_step: 1.0,
        };
        Ok(self.last_obs)
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn sim(&self) -> &FarmSim {
        &self.sim
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn observation(&self) -> Observation {
        self.last_obs
    }

    /// Step budget: nominal steps over the emission horizon plus the drain allowance.
    pub fn step_limit(&self) -> usize {
        self.episode.nominal_steps() + self.episode.drain_cap
    }

    pub fn view(&self) -> ControlView {
        let snap = self.sim.snapshot();
        ControlView {
            observation: self.last_obs,
            step_duration: self.episode.step_duration,
            arrived_last_step: self.last_arrived,
            enqueued_total: snap.enqueued_total,
            completed_total: snap.completed_total,
            q_work: snap.q_work,
            effective_workers: snap.effective_workers,
        }
    }

    pub fn step(&mut self, action: ScalingAction) -> Result<Step> {
        if self.terminated {
            return Err(Error::Terminated);
        }
        let applied_delta = self.sim.request_scale(action.delta());
        let stats = self.sim.advance(self.episode.step_duration);
        self.step_index += 1;

        let window = self.episode.obs_window;
        self.service_window.push_back(stats.completions.iter().map(|c| c.service).collect());
        self.arrival_window.push_back(stats.arrived);
        while self.service_window.len() > window {
            self.service_window.pop_front();
        }
        while self.arrival_window.len() > window {
            self.arrival_window.pop_front();
        }
        let (sum, count, max) = self
            .service_window
            .iter()
            .flatten()
            .fold((0.0, 0usize, 0.0f64), |(s, n, m), &t| (s + t, n + 1, m.max(t)));
        let t_proc_avg = if count > 0 { sum / count as f64 } else { 0.0 };
        let arrivals: usize = self.arrival_window.iter().sum();
        let arrival_rate = arrivals as f64 / (window as f64 * self.episode.step_duration);
        if stats.completed > 0 {
            self.last_qos = stats.hits as f64 / stats.completed as f64;
        }

        let snap = self.sim.snapshot();
        let observation = Observation {
            q_in: snap.q_in as f64,
            q_work: snap.q_work as f64,
            q_res: snap.q_res as f64,
            q_out: snap.q_out as f64,
            n_workers: snap.effective_workers as f64,
            t_proc_avg,
            t_proc_max: max,
            arrival_rate,
            qos_step: self.last_qos,
        };
        let terms = compute_reward(
            &self.reward,
            &RewardInputs {
                qos: observation.qos_step,
                backlog: observation.q_work,
                workers: observation.n_workers,
                applied_delta,
            },
        );
        let reward = terms.total();

        let drained = self.sim.is_drained();
        self.terminated = drained || self.step_index >= self.step_limit();
        self.last_obs = observation;
        self.last_arrived = stats.arrived;

        self.log.steps.push(StepRecord {
            step: self.step_index,
            observation,
            action,
            applied_delta,
            reward,
            terms,
            arrived: stats.arrived,
            completed: stats.completed,
            hits: stats.hits,
        });
        if self.terminated {
            self.finalize_tasks();
        }

        Ok(Step {
            observation,
            reward,
            terminated: self.terminated,
            info: StepInfo {
                applied_delta,
                terms,
                arrived: stats.arrived,
                completed: stats.completed,
                hits: stats.hits,
                snapshot: snap,
                completions: stats.completions,
            },
        })
    }

    /// Per-task outcomes; tasks unfinished at close count as misses.
    fn finalize_tasks(&mut self) {
        let completions = self.sim.completion_times();
        self.log.tasks = self
            .workload
            .iter()
            .zip(completions)
            .map(|(t, c)| TaskRecord {
                task_id: t.task_id,
                arrival: t.arrival_time,
                size_px: t.size_px,
                service: t.service_time,
                deadline: t.deadline,
                phase_index: t.phase_index,
                completion: *c,
                met: c.map(|c| c - t.arrival_time <= t.deadline).unwrap_or(false),
            })
            .collect();
    }

    /// Log of the current episode; task records are filled once it terminates.
    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }
}

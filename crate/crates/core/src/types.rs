//! Shared domain vocabulary: tasks, observations, actions and configuration.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::workload::WorkloadPhaseSpec;

/// One stream item. `deadline` is the relative allowance, not an absolute instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u64,
    pub arrival_time: f64,
    pub size_px: u32,
    pub service_time: f64,
    pub deadline: f64,
    pub phase_index: usize,
}

/// Farm state summary fed to every policy, in fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub q_in: f64,
    pub q_work: f64,
    pub q_res: f64,
    pub q_out: f64,
    pub n_workers: f64,
    pub t_proc_avg: f64,
    pub t_proc_max: f64,
    pub arrival_rate: f64,
    pub qos_step: f64,
}

impl Observation {
    pub const DIM: usize = 9;

    pub const NAMES: [&'static str; 9] = [
        "q_in",
        "q_work",
        "q_res",
        "q_out",
        "n_workers",
        "t_proc_avg",
        "t_proc_max",
        "arrival_rate",
        "qos_step",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.q_in,
            self.q_work,
            self.q_res,
            self.q_out,
            self.n_workers,
            self.t_proc_avg,
            self.t_proc_max,
            self.arrival_rate,
            self.qos_step,
        ]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        Observation {
            q_in: v[0],
            q_work: v[1],
            q_res: v[2],
            q_out: v[3],
            n_workers: v[4],
            t_proc_avg: v[5],
            t_proc_max: v[6],
            arrival_rate: v[7],
            qos_step: v[8],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Unit change of the worker pool. Index order is `Down, Hold, Up`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScalingAction {
    Down,
    Hold,
    Up,
}

impl ScalingAction {
    pub const ALL: [ScalingAction; 3] = [ScalingAction::Down, ScalingAction::Hold, ScalingAction::Up];

    pub fn delta(self) -> i32 {
        match self {
            ScalingAction::Down => -1,
            ScalingAction::Hold => 0,
            ScalingAction::Up => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn from_delta(delta: i32) -> Option<Self> {
        match delta {
            -1 => Some(ScalingAction::Down),
            0 => Some(ScalingAction::Hold),
            1 => Some(ScalingAction::Up),
            _ => None,
        }
    }
}

/// Closed interval of per-worker startup latency, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub phases: Vec<WorkloadPhaseSpec>,
    pub step_duration: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub n_init: u32,
    pub beta: f64,
    pub scale_up_latency: LatencyRange,
    /// Initial pool is ready at time zero, as when the stream clock starts
    /// after farm initialization. Otherwise it cold-starts sequentially.
    pub warm_start: bool,
    pub obs_window: usize,
    pub drain_cap: usize,
    pub rng_seed: u64,
}

impl Default for EpisodeConfig {
    /// Four 60 s phases at base rate 5 tasks/s, 8 s control steps.
    fn default() -> Self {
        EpisodeConfig {
            phases: WorkloadPhaseSpec::four_phase(5.0, 60.0, 5.0),
            step_duration: 8.0,
            n_min: 1,
            n_max: 20,
            n_init: 12,
            beta: 2.0,
            scale_up_latency: LatencyRange { lo: 5.0, hi: 8.0 },
            warm_start: false,
            obs_window: 3,
            drain_cap: 15,
            rng_seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.n_min && self.n_min <= self.n_init && self.n_init <= self.n_max) {
            return Err(invalid("require 1 <= n_min <= n_init <= n_max"));
        }
        if !(self.step_duration > 0.0) {
            return Err(invalid("step_duration must be positive"));
        }
        if !(self.beta > 1.0) {
            return Err(invalid("beta must exceed 1"));
        }
        let LatencyRange { lo, hi } = self.scale_up_latency;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(invalid("scale-up latency requires 0 <= lo <= hi"));
        }
        if self.obs_window == 0 {
            return Err(invalid("obs_window must be at least 1"));
        }
        for p in &self.phases {
            p.validate()?;
        }
        Ok(())
    }

    /// Emission horizon: sum of phase durations.
    pub fn horizon(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Control steps needed to cover the emission horizon.
    pub fn nominal_steps(&self) -> usize {
        libm::ceil(self.horizon() / self.step_duration - 1e-9).max(0.0) as usize
    }
}

/// Targets, thresholds and weights of the shaped reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub q_target: f64,
    pub q_queue_target: f64,
    pub q_idle: f64,
    pub n_target: f64,
    pub w_qos: f64,
    pub w_backlog: f64,
    pub w_scale: f64,
    pub w_eff: f64,
    pub w_up: f64,
    pub w_down: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            q_target: 0.9,
            q_queue_target: 40.0,
            q_idle: 5.0,
            n_target: 12.0,
            w_qos: 10.0,
            w_backlog: 5.0,
            w_scale: 0.5,
            w_eff: 0.5,
            w_up: 1.0,
            w_down: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_queue_target > 0.0) {
            return Err(invalid("q_queue_target must be positive"));
        }
        if self.q_idle > self.q_queue_target {
            return Err(invalid("q_idle must not exceed q_queue_target"));
        }
        if !(self.q_target > 0.0 && self.q_target <= 1.0) {
            return Err(invalid("q_target must lie in (0, 1]"));
        }
        let weights = [self.w_qos, self.w_backlog, self.w_scale, self.w_eff, self.w_up, self.w_down];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("reward weights must be nonnegative"));
        }
        Ok(())
    }
}

/// The seven additive terms of the shaped reward, each already signed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub qos: f64,
    pub backlog: f64,
    pub scale: f64,
    pub efficiency: f64,
    pub justified_up: f64,
    pub safe_down: f64,
    pub stable_bonus: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.qos
            + self.backlog
            + self.scale
            + self.efficiency
            + self.justified_up
            + self.safe_down
            + self.stable_bonus
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.qos,
            self.backlog,
            self.scale,
            self.efficiency,
            self.justified_up,
            self.safe_down,
            self.stable_bonus,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub observation: Observation,
    pub action: ScalingAction,
    pub applied_delta: i32,
    pub reward: f64,
    pub terms: RewardTerms,
    pub arrived: usize,
    pub completed: usize,
    pub hits: usize,
}

/// Outcome of one task. `completion` is `None` when the episode closed first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub arrival: f64,
    pub size_px: u32,
    pub service: f64,
    pub deadline: f64,
    pub phase_index: usize,
    pub completion: Option<f64>,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub step_duration: f64,
    pub steps: Vec<StepRecord>,
    pub tasks: Vec<TaskRecord>,
}

impl EpisodeLog {
    /// Worker count at the end of every step.
    pub fn worker_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.observation.n_workers).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn check_consistency(&self) -> Result<()> {
        let arrived: usize = self.steps.iter().map(|s| s.arrived).sum();
        if arrived != self.tasks.len() {
            return Err(invalid("arrivals over steps differ from emitted tasks"));
        }
        let mut ids: Vec<u64> = self.tasks.iter().map(|t| t.task_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate task record"));
        }
        Ok(())
    }
}

pub fn compute_deadline(expected_service: f64, beta: f64) -> Result<f64> {
    if !(expected_service > 0.0) {
        return Err(invalid("expected service time must be positive"));
    }
    if !(beta > 1.0) {
        return Err(invalid("beta must exceed 1"));
    }
    Ok(beta * expected_service)
}

/// A task meets its deadline when its sojourn time does not exceed the allowance.
pub fn deadline_met(arrival: f64, completion: f64, deadline: f64) -> Result<bool> {
    if completion < arrival {
        return Err(Error::InvalidArgument(alloc::format!(
            "completion {completion} precedes arrival {arrival}"
        )));
    }
    Ok(completion - arrival <= deadline)
}

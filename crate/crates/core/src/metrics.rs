//! Episode metrics and the two pricing models, computed offline from logs.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::EpisodeLog;
use crate::workload::PhaseSlot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Pay-as-you-go price per worker-second.
    pub c_w: f64,
    /// Price per scaling event.
    pub c_scale: f64,
    /// Reserved price per worker-second.
    pub c_sub: f64,
    /// On-demand price per worker-second above the reservation.
    pub c_burst: f64,
    pub n_sub: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { c_w: 1.0, c_scale: 1.0, c_sub: 0.6, c_burst: 1.2, n_sub: 8.0 }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.c_w) && ok(self.c_scale) && ok(self.c_sub) && ok(self.c_burst) && ok(self.n_sub)) {
            return Err(invalid("tariffs and reservation must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase_index: usize,
    /// `None` when no task was emitted in the phase.
    pub qos: Option<f64>,
    /// `None` when no control step started inside the phase.
    pub mean_workers: Option<f64>,
    pub tasks: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub final_qos: f64,
    pub n_mean: f64,
    pub n_max: f64,
    pub n_scale: usize,
    pub no_ops: usize,
    /// Indexed by configured phase.
    pub phases: Vec<PhaseSummary>,
    pub total_reward: f64,
    pub steps: usize,
    pub duration: f64,
}

/// Met tasks over emitted tasks; unfinished tasks count as missed.
pub fn final_qos(log: &EpisodeLog) -> f64 {
    if log.tasks.is_empty() {
        return 1.0;
    }
    log.tasks.iter().filter(|t| t.met && t.completion.is_some()).count() as f64 / log.tasks.len() as f64
}

/// Number of changes in a worker series; the first sample has no predecessor.
pub fn count_changes(series: &[f64]) -> usize {
    series.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Worker counts are taken at the end of each step. Steps are assigned to the
/// phase slot containing their start time; tasks to their emission phase.
pub fn summarize_episode(log: &EpisodeLog, schedule: &[PhaseSlot]) -> Result<EpisodeSummary> {
    if log.steps.is_empty() {
        return Err(Error::EmptyInput("episode log has no steps".into()));
    }
    let series = log.worker_series();
    let k = series.len();
    let n_phases = schedule.iter().map(|s| s.phase_index + 1).max().unwrap_or(0);
    let mut met = vec![0usize; n_phases];
    let mut emitted = vec![0usize; n_phases];
    for t in &log.tasks {
        if t.phase_index >= n_phases {
            return Err(invalid("task refers to a phase outside the schedule"));
        }
        emitted[t.phase_index] += 1;
        if t.met && t.completion.is_some() {
            met[t.phase_index] += 1;
        }
    }
    let mut worker_sum = vec![0.0; n_phases];
    let mut worker_steps = vec![0usize; n_phases];
    for (i, n) in series.iter().enumerate() {
        let start = i as f64 * log.step_duration;
        if let Some(slot) = schedule.iter().find(|s| start >= s.start && start < s.end) {
            worker_sum[slot.phase_index] += n;
            worker_steps[slot.phase_index] += 1;
        }
    }
    let phases = (0..n_phases)
        .map(|p| PhaseSummary {
            phase_index: p,
            qos: (emitted[p] > 0).then(|| met[p] as f64 / emitted[p] as f64),
            mean_workers: (worker_steps[p] > 0).then(|| worker_sum[p] / worker_steps[p] as f64),
            tasks: emitted[p],
            steps: worker_steps[p],
        })
        .collect();
    let n_scale = log.steps.iter().filter(|s| s.applied_delta != 0).count();
    Ok(EpisodeSummary {
        final_qos: final_qos(log),
        n_mean: series.iter().sum::<f64>() / k as f64,
        n_max: series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_scale,
        no_ops: k - n_scale,
        phases,
        total_reward: log.total_reward(),
        steps: k,
        duration: k as f64 * log.step_duration,
    })
}

pub fn cost_paygo(series: &[f64], step_duration: f64, cfg: &CostConfig) -> f64 {
    let usage: f64 = series.iter().sum::<f64>() * step_duration;
    cfg.c_w * usage + cfg.c_scale * count_changes(series) as f64
}

pub fn cost_sub(series: &[f64], step_duration: f64, cfg: &CostConfig) -> f64 {
    let horizon = series.len() as f64 * step_duration;
    let burst: f64 = series.iter().map(|n| (n - cfg.n_sub).max(0.0)).sum::<f64>() * step_duration;
    cfg.c_sub * cfg.n_sub * horizon + cfg.c_burst * burst + cfg.c_scale * count_changes(series) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<Stat> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Stat { mean, std: libm::sqrt(var) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeCosts {
    pub paygo: f64,
    pub sub: f64,
}

pub fn episode_costs(log: &EpisodeLog, cfg: &CostConfig) -> EpisodeCosts {
    let s = log.worker_series();
    EpisodeCosts { paygo: cost_paygo(&s, log.step_duration, cfg), sub: cost_sub(&s, log.step_duration, cfg) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub episodes: usize,
    pub final_qos: Stat,
    pub n_mean: Stat,
    pub n_max: Stat,
    pub n_scale: Stat,
    pub no_ops: Stat,
    pub total_reward: Stat,
    /// Per configured phase; `None` when the phase had no samples in any run.
    pub phase_qos: Vec<Option<Stat>>,
    pub phase_workers: Vec<Option<Stat>>,
    pub cost_paygo: Stat,
    pub cost_sub: Stat,
}

/// Mean and spread over runs. `costs[i]` belongs to `summaries[i]`.
pub fn aggregate(summaries: &[EpisodeSummary], costs: &[EpisodeCosts]) -> Result<AggregateSummary> {
    if summaries.is_empty() {
        return Err(Error::EmptyInput("no episode summaries".into()));
    }
    if costs.len() != summaries.len() {
        return Err(invalid("one cost entry per summary is required"));
    }
    let col = |f: &dyn Fn(&EpisodeSummary) -> f64| mean_std(&summaries.iter().map(f).collect::<Vec<_>>());
    let n_phases = summaries.iter().map(|s| s.phases.len()).max().unwrap_or(0);
    let per_phase = |f: &dyn Fn(&PhaseSummary) -> Option<f64>| -> Vec<Option<Stat>> {
        (0..n_phases)
            .map(|p| {
                let v: Vec<f64> = summaries.iter().filter_map(|s| s.phases.get(p).and_then(f)).collect();
                mean_std(&v).ok()
            })
            .collect()
    };
    Ok(AggregateSummary {
        episodes: summaries.len(),
        final_qos: col(&|s| s.final_qos)?,
        n_mean: col(&|s| s.n_mean)?,
        n_max: col(&|s| s.n_max)?,
        n_scale: col(&|s| s.n_scale as f64)?,
        no_ops: col(&|s| s.no_ops as f64)?,
        total_reward: col(&|s| s.total_reward)?,
        phase_qos: per_phase(&|p| p.qos),
        phase_workers: per_phase(&|p| p.mean_workers),
        cost_paygo: mean_std(&costs.iter().map(|c| c.paygo).collect::<Vec<_>>())?,
        cost_sub: mean_std(&costs.iter().map(|c| c.sub).collect::<Vec<_>>())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Observation, RewardTerms, ScalingAction, StepRecord, TaskRecord};
    use proptest::prelude::*;

    fn step(i: usize, n: f64, delta: i32) -> StepRecord {
        StepRecord {
            step: i,
            observation: Observation { n_workers: n, ..Observation::default() },
            action: ScalingAction::from_delta(delta).unwrap(),
            applied_delta: delta,
            reward: 1.0,
            terms: RewardTerms::default(),
            arrived: 0,
            completed: 0,
            hits: 0,
        }
    }

    fn task(id: u64, phase: usize, completion: Option<f64>, met: bool) -> TaskRecord {
        TaskRecord { task_id: id, arrival: 0.0, size_px: 512, service: 0.05, deadline: 0.1, phase_index: phase, completion, met }
    }

    fn slots() -> Vec<PhaseSlot> {
        vec![PhaseSlot { phase_index: 1, start: 0.0, end: 2.0 }, PhaseSlot { phase_index: 0, start: 2.0, end: 3.0 }]
    }

    #[test]
    fn three_step_counters() {
        let log = EpisodeLog {
            step_duration: 1.0,
            steps: vec![step(0, 2.0, 0), step(1, 2.0, 0), step(2, 3.0, 1)],
            tasks: vec![task(0, 0, Some(1.0), true), task(1, 1, Some(1.0), true)],
        };
        let s = summarize_episode(&log, &slots()).unwrap();
        assert!((s.n_mean - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!((s.n_scale, s.no_ops, s.steps), (1, 2, 3));
        assert_eq!(s.n_max, 3.0);
        assert_eq!(s.final_qos, 1.0);
        assert_eq!(s.total_reward, 3.0);
        assert_eq!(s.duration, 3.0);
        // Steps 0 and 1 start in the slot of phase 1, step 2 in phase 0.
        assert_eq!(s.phases[1].mean_workers, Some(2.0));
        assert_eq!(s.phases[0].mean_workers, Some(3.0));
    }

    #[test]
    fn unfinished_tasks_are_misses() {
        let log = EpisodeLog {
            step_duration: 1.0,
            steps: vec![step(0, 1.0, 0)],
            tasks: vec![task(0, 0, Some(1.0), true), task(1, 0, None, false), task(2, 1, Some(2.0), false), task(3, 1, Some(1.0), true)],
        };
        let s = summarize_episode(&log, &slots()).unwrap();
        assert_eq!(s.final_qos, 0.5);
        assert_eq!(s.phases[0].qos, Some(0.5));
        assert_eq!(s.phases[1].qos, Some(0.5));
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(summarize_episode(&EpisodeLog::default(), &slots()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn paygo_example() {
        let cfg = CostConfig { c_w: 1.0, c_scale: 0.5, ..CostConfig::default() };
        assert!((cost_paygo(&[2.0, 2.0, 3.0], 1.0, &cfg) - 7.5).abs() < 1e-9);
        assert!((cost_paygo(&[4.0; 5], 2.0, &cfg) - 40.0).abs() < 1e-9);
        let free = CostConfig { c_w: 0.0, c_scale: 0.5, ..cfg };
        assert!((cost_paygo(&[1.0, 2.0, 1.0], 8.0, &free) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn subscription_example() {
        let cfg = CostConfig { c_w: 0.0, c_scale: 0.0, c_sub: 1.0, c_burst: 2.0, n_sub: 3.0 };
        assert!((cost_sub(&[2.0, 4.0], 1.0, &cfg) - 8.0).abs() < 1e-9);
        let reserved = CostConfig { n_sub: 10.0, ..cfg };
        assert!((cost_sub(&[2.0, 4.0, 9.0], 8.0, &reserved) - 240.0).abs() < 1e-9);
    }

    #[test]
    fn population_std() {
        let s = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert!(mean_std(&[]).is_err());
    }

    proptest! {
        #[test]
        fn costs_are_monotone(series in proptest::collection::vec(1u32..20, 1..30), idx in 0usize..30, bump in 1u32..5) {
            let cfg = CostConfig::default();
            let base: Vec<f64> = series.iter().map(|&n| n as f64).collect();
            // Raising one sample with no scale price keeps usage monotone.
            let flat = CostConfig { c_scale: 0.0, ..cfg };
            let mut raised = base.clone();
            let i = idx % raised.len();
            raised[i] += bump as f64;
            prop_assert!(cost_paygo(&raised, 8.0, &flat) >= cost_paygo(&base, 8.0, &flat));
            prop_assert!(cost_sub(&raised, 8.0, &flat) >= cost_sub(&base, 8.0, &flat));
            // A scale price below half a worker-step cannot offset the extra usage.
            prop_assert!(cost_paygo(&raised, 8.0, &cfg) >= cost_paygo(&base, 8.0, &cfg));
        }

        #[test]
        fn subscription_degenerates_to_paygo(series in proptest::collection::vec(0u32..30, 1..40), c_w in 0.0f64..5.0, c_scale in 0.0f64..5.0) {
            let s: Vec<f64> = series.iter().map(|&n| n as f64).collect();
            let pay = CostConfig { c_w, c_scale, c_sub: 0.0, c_burst: c_w, n_sub: 0.0 };
            prop_assert!((cost_sub(&s, 8.0, &pay) - cost_paygo(&s, 8.0, &pay)).abs() <= 1e-9 * (1.0 + cost_paygo(&s, 8.0, &pay)));
        }
    }
}

//! Analytical reactive baselines derived from the steady-state farm model.
//!
//! Required parallelism over one control step is the work arriving in the step
//! (`k`), the backlog left from earlier steps (`l`) and the work in progress
//! (`m`), each converted to workers through the per-task service time.

use serde::{Deserialize, Serialize};

use crate::env::ControlView;
use crate::types::ScalingAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveInputs {
    pub t_service: f64,
    pub t_step: f64,
    pub k_new: f64,
    pub l_backlog: f64,
    pub m_active: f64,
    pub w_current: f64,
}

/// In-flight tasks from the mirrored enqueue counter. The flag reports an
/// inconsistent (negative) estimate that was clamped to zero.
pub fn estimate_active(enqueued_total: u64, completed_total: u64, q_work_len: u64) -> (u64, bool) {
    let seen = completed_total + q_work_len;
    if enqueued_total >= seen {
        (enqueued_total - seen, false)
    } else {
        (0, true)
    }
}

pub fn average_delta(x: &ReactiveInputs) -> f64 {
    x.t_service / x.t_step * (x.k_new + x.l_backlog + x.m_active / 2.0) - x.w_current
}

pub fn maximum_delta(x: &ReactiveInputs) -> f64 {
    x.t_service / x.t_step * (x.k_new + x.l_backlog + x.m_active) - x.w_current
}

/// Nearest unit action: round half away from zero, then clamp to ±1.
pub fn delta_to_action(delta: f64) -> ScalingAction {
    let r = libm::round(delta).clamp(-1.0, 1.0) as i32;
    ScalingAction::from_delta(r).unwrap_or(ScalingAction::Hold)
}

fn decide(x: &ReactiveInputs, delta: fn(&ReactiveInputs) -> f64) -> ScalingAction {
    // No completed work yet: the service time is undefined, hold.
    if !(x.t_service > 0.0) || !(x.t_step > 0.0) {
        return ScalingAction::Hold;
    }
    delta_to_action(delta(x))
}

pub fn reactive_average(x: &ReactiveInputs) -> ScalingAction {
    decide(x, average_delta)
}

pub fn reactive_maximum(x: &ReactiveInputs) -> ScalingAction {
    decide(x, maximum_delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReactiveKind {
    Average,
    Maximum,
}

/// Builds the reactive inputs from what the environment exposes.
pub fn inputs_from_view(kind: ReactiveKind, view: &ControlView) -> ReactiveInputs {
    let obs = &view.observation;
    let (m, _) = estimate_active(view.enqueued_total, view.completed_total, view.q_work as u64);
    ReactiveInputs {
        t_service: match kind {
            ReactiveKind::Average => obs.t_proc_avg,
            ReactiveKind::Maximum => obs.t_proc_max,
        },
        t_step: view.step_duration,
        k_new: view.arrived_last_step as f64,
        l_backlog: view.q_work as f64,
        m_active: m as f64,
        w_current: view.effective_workers as f64,
    }
}

pub fn reactive_action(kind: ReactiveKind, view: &ControlView) -> ScalingAction {
    let x = inputs_from_view(kind, view);
    match kind {
        ReactiveKind::Average => reactive_average(&x),
        ReactiveKind::Maximum => reactive_maximum(&x),
    }
}

//! Tabular SARSA(λ) with accumulating eligibility traces.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::discretize::{Discretizer, StateKey};
use super::{epsilon_greedy, Agent, EpsilonSchedule, Transition};
use crate::error::{invalid, Result};
use crate::rng::SimRng;
use crate::types::{Observation, ScalingAction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarsaConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: EpsilonSchedule,
    /// Traces below this magnitude are dropped.
    pub trace_threshold: f64,
}

impl Default for SarsaConfig {
    fn default() -> Self {
        SarsaConfig {
            alpha: 0.1,
            gamma: 0.95,
            lambda: 0.9,
            epsilon: EpsilonSchedule { start: 1.0, min: 0.05, decay: 0.98 },
            trace_threshold: 1e-4,
        }
    }
}

impl SarsaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !unit(self.gamma) || !unit(self.lambda) {
            return Err(invalid("alpha must lie in (0, 1], gamma and lambda in [0, 1]"));
        }
        let e = &self.epsilon;
        if !unit(e.start) || !unit(e.min) || !unit(e.decay) || e.min > e.start {
            return Err(invalid("epsilon schedule out of range"));
        }
        if !(self.trace_threshold >= 0.0) {
            return Err(invalid("trace threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Sparse action-value table. Unvisited pairs read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: BTreeMap<StateKey, [f64; 3]>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &StateKey) -> [f64; 3] {
        self.values.get(s).copied().unwrap_or([0.0; 3])
    }

    pub fn value(&self, s: &StateKey, a: usize) -> f64 {
        self.get(s)[a]
    }

    pub fn entry(&mut self, s: StateKey) -> &mut [f64; 3] {
        self.values.entry(s).or_insert([0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&StateKey, &[f64; 3])> {
        self.values.iter()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (StateKey, [f64; 3])>) -> Self {
        QTable { values: entries.into_iter().collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceTable {
    traces: BTreeMap<(StateKey, u8), f64>,
}

impl TraceTable {
    pub fn get(&self, s: &StateKey, a: usize) -> f64 {
        self.traces.get(&(*s, a as u8)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn clear(&mut self) {
        self.traces.clear();
    }
}

/// One on-policy update. `next` is the successor pair, `None` when terminal.
/// Returns the TD error.
pub fn sarsa_update(
    q: &mut QTable,
    traces: &mut TraceTable,
    cfg: &SarsaConfig,
    s: &StateKey,
    a: usize,
    reward: f64,
    next: Option<(&StateKey, usize)>,
) -> f64 {
    let bootstrap = next.map_or(0.0, |(s2, a2)| cfg.gamma * q.value(s2, a2));
    let delta = reward + bootstrap - q.value(s, a);
    *traces.traces.entry((*s, a as u8)).or_insert(0.0) += 1.0;
    let decay = cfg.gamma * cfg.lambda;
    let mut dead: Vec<(StateKey, u8)> = Vec::new();
    for (&(key, act), e) in traces.traces.iter_mut() {
        q.entry(key)[act as usize] += cfg.alpha * delta * *e;
        *e *= decay;
        if e.abs() < cfg.trace_threshold || *e == 0.0 {
            dead.push((key, act));
        }
    }
    for k in dead {
        traces.traces.remove(&k);
    }
    delta
}

#[derive(Debug, Clone)]
pub struct SarsaAgent {
    pub config: SarsaConfig,
    pub discretizer: Discretizer,
    pub q: QTable,
    pub traces: TraceTable,
    pub epsilon: f64,
}

impl SarsaAgent {
    pub fn new(config: SarsaConfig, discretizer: Discretizer) -> Result<Self> {
        config.validate()?;
        Ok(SarsaAgent { epsilon: config.epsilon.start, config, discretizer, q: QTable::new(), traces: TraceTable::default() })
    }

    pub fn greedy(&self, obs: &Observation) -> ScalingAction {
        ScalingAction::ALL[super::argmax_last(&self.q.get(&self.discretizer.key(obs)))]
    }
}

impl Agent for SarsaAgent {
    fn begin_episode(&mut self) {
        self.traces.clear();
    }

    fn act(&mut self, obs: &Observation, explore: bool, rng: &mut SimRng) -> ScalingAction {
        let values = self.q.get(&self.discretizer.key(obs));
        let eps = if explore { self.epsilon } else { 0.0 };
        ScalingAction::ALL[epsilon_greedy(&values, eps, rng)]
    }

    fn learn(&mut self, t: &Transition, _rng: &mut SimRng) -> Option<f64> {
        let s = self.discretizer.key(&t.obs);
        let s2 = self.discretizer.key(&t.next_obs);
        let next = match (t.terminal, t.next_action) {
            (false, Some(a2)) => Some((&s2, a2.index())),
            _ => None,
        };
        let delta = sarsa_update(&mut self.q, &mut self.traces, &self.config, &s, t.action.index(), t.reward, next);
        Some(delta)
    }

    fn end_episode(&mut self) {
        self.traces.clear();
        self.epsilon = self.config.epsilon.next(self.epsilon);
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

//! Experiment driver: workloads, single episodes, training and comparisons.

use farmscale_core::agents::{self, Agent, Discretizer, DqnAgent, ObsBounds, SarsaAgent, TrainingRecord};
use farmscale_core::metrics::{self, aggregate, episode_costs, AggregateSummary, EpisodeCosts};
use farmscale_core::policy::{run_episode, Constant, Controller, Greedy};
use farmscale_core::reactive::ReactiveKind;
use farmscale_core::rng::STREAM_AGENT;
use farmscale_core::sim::TraceEvent;
use farmscale_core::workload::{PhaseSlot, SizeDistribution, Workload};
use farmscale_core::{build_episode_workload, stream_rng, EpisodeLog, EpisodeSummary, FarmEnv, Observation, ScalingAction};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{HarnessError, Result};

/// Workload seed of training episode `episode` under base seed `seed`. Kept
/// apart from the small integers used as evaluation seeds.
pub fn training_seed(seed: u64, episode: usize) -> u64 {
    (seed ^ 0x7261_696e_0000_0000).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(episode as u64 + 1)
}

pub enum Policy {
    Reactive(ReactiveKind),
    /// Fixed action every step; a reference point for the other controllers.
    Constant(Constant),
    Sarsa(Box<SarsaAgent>),
    Dqn(Box<DqnAgent>),
}

impl Policy {
    /// Parses `reactive-avg`, `reactive-max`, `hold`, `always-up`, or a checkpoint path.
    pub fn load(spec: &str) -> Result<Self> {
        match spec {
            "reactive-avg" => Ok(Policy::Reactive(ReactiveKind::Average)),
            "reactive-max" => Ok(Policy::Reactive(ReactiveKind::Maximum)),
            "hold" => Ok(Policy::Constant(Constant(ScalingAction::Hold))),
            "always-up" => Ok(Policy::Constant(Constant(ScalingAction::Up))),
            path => Self::from_checkpoint(Checkpoint::load(std::path::Path::new(path))?),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        match c.kind() {
            "sarsa" => Ok(Policy::Sarsa(Box::new(c.into_sarsa()?))),
            _ => Ok(Policy::Dqn(Box::new(c.into_dqn()?))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Reactive(ReactiveKind::Average) => "reactive-avg",
            Policy::Reactive(ReactiveKind::Maximum) => "reactive-max",
            Policy::Constant(Constant(ScalingAction::Up)) => "always-up",
            Policy::Constant(Constant(ScalingAction::Down)) => "always-down",
            Policy::Constant(Constant(ScalingAction::Hold)) => "hold",
            Policy::Sarsa(_) => "sarsa",
            Policy::Dqn(_) => "dqn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub log: EpisodeLog,
    pub schedule: Vec<PhaseSlot>,
    pub summary: EpisodeSummary,
    pub costs: EpisodeCosts,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub seeds: Vec<u64>,
    pub summaries: Vec<EpisodeSummary>,
    pub costs: Vec<EpisodeCosts>,
    pub aggregate: AggregateSummary,
}

pub struct Harness {
    pub config: Config,
    dist: SizeDistribution,
}

impl Harness {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let dist = config.workload.size_distribution()?;
        Ok(Harness { config, dist })
    }

    pub fn size_distribution(&self) -> &SizeDistribution {
        &self.dist
    }

    pub fn workload(&self, seed: u64, shuffle: bool) -> Result<Workload> {
        Ok(build_episode_workload(
            &self.config.episode,
            &self.dist,
            &self.config.workload.service_model,
            shuffle,
            seed,
        )?)
    }

    pub fn env(&self, workload: &Workload, seed: u64) -> Result<(FarmEnv, Observation)> {
        Ok(FarmEnv::new(self.config.episode.clone(), self.config.reward, &workload.tasks, seed)?)
    }

    pub fn obs_bounds(&self) -> Result<ObsBounds> {
        Ok(ObsBounds::for_episode(&self.config.episode, self.config.dqn.queue_cap, self.config.workload.max_service()?))
    }

    /// Runs one episode of `ctrl` on the workload of `seed`.
    pub fn run_with<C: Controller + ?Sized>(&self, ctrl: &mut C, seed: u64, shuffle: bool, trace: bool) -> Result<EpisodeOutcome> {
        let workload = self.workload(seed, shuffle)?;
        let (mut env, _) = self.env(&workload, seed)?;
        if trace {
            env.set_trace(true);
            env.reset(&workload.tasks, seed)?;
        }
        let mut rng = stream_rng(seed, STREAM_AGENT);
        run_episode(&mut env, ctrl, &mut rng)?;
        let trace_events = env.sim().trace().to_vec();
        let log = env.into_log();
        let summary = metrics::summarize_episode(&log, &workload.schedule)?;
        let costs = episode_costs(&log, &self.config.cost);
        Ok(EpisodeOutcome { seed, log, schedule: workload.schedule, summary, costs, trace: trace_events })
    }

    pub fn run(&self, policy: &mut Policy, seed: u64, shuffle: bool, trace: bool) -> Result<EpisodeOutcome> {
        match policy {
            Policy::Reactive(kind) => self.run_with(kind, seed, shuffle, trace),
            Policy::Constant(c) => self.run_with(c, seed, shuffle, trace),
            Policy::Sarsa(a) => self.run_with(&mut Greedy(a.as_mut()), seed, shuffle, trace),
            Policy::Dqn(a) => self.run_with(&mut Greedy(a.as_mut()), seed, shuffle, trace),
        }
    }

    fn train_agent<A: Agent>(&self, agent: &mut A, episodes: usize, seed: u64) -> Result<Vec<TrainingRecord>> {
        let shuffle = self.config.training.shuffle;
        let mut rng = stream_rng(seed, STREAM_AGENT);
        let records = agents::train(
            agent,
            |i| {
                let s = training_seed(seed, i);
                let w = build_episode_workload(
                    &self.config.episode,
                    &self.dist,
                    &self.config.workload.service_model,
                    shuffle,
                    s,
                )?;
                FarmEnv::new(self.config.episode.clone(), self.config.reward, &w.tasks, s)
            },
            episodes,
            &mut rng,
        )?;
        Ok(records)
    }

    pub fn new_sarsa(&self) -> Result<SarsaAgent> {
        Ok(SarsaAgent::new(self.config.sarsa, Discretizer::standard(self.config.episode.n_max))?)
    }

    pub fn train_sarsa(&self, episodes: usize, seed: u64) -> Result<(SarsaAgent, Vec<TrainingRecord>)> {
        let mut agent = self.new_sarsa()?;
        let records = self.train_agent(&mut agent, episodes, seed)?;
        Ok((agent, records))
    }

    pub fn new_dqn(&self, seed: u64) -> Result<DqnAgent> {
        let mut init = stream_rng(seed, STREAM_AGENT + 1);
        Ok(DqnAgent::new(self.config.dqn.clone(), self.obs_bounds()?, &mut init)?)
    }

    pub fn train_dqn(&self, episodes: usize, seed: u64) -> Result<(DqnAgent, Vec<TrainingRecord>)> {
        let mut agent = self.new_dqn(seed)?;
        let records = self.train_agent(&mut agent, episodes, seed)?;
        if agent.numeric_fault {
            return Err(HarnessError::Core(farmscale_core::Error::Numeric("non-finite values during training".into())));
        }
        Ok((agent, records))
    }

    /// Evaluates one policy on every seed, in order.
    pub fn evaluate(&self, label: &str, policy: &mut Policy, seeds: &[u64], shuffle: bool) -> Result<PolicyReport> {
        if seeds.is_empty() {
            return Err(HarnessError::Usage("at least one seed is required".into()));
        }
        let mut summaries = Vec::with_capacity(seeds.len());
        let mut costs = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let out = self.run(policy, s, shuffle, false)?;
            summaries.push(out.summary);
            costs.push(out.costs);
        }
        let aggregate = aggregate(&summaries, &costs)?;
        Ok(PolicyReport { policy: label.into(), seeds: seeds.to_vec(), summaries, costs, aggregate })
    }
}

//! Simulation core of an autoscaling testbed for a task-farm pattern: an
//! emitter feeds a pool of elastic workers whose size is steered once per
//! control step by reactive rules or learned agents.
//!
//! The crate is `no_std` with `alloc`; file formats and the command line live
//! in the companion `farmscale` crate.
#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod agents;
pub mod env;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod reactive;
pub mod rng;
pub mod sim;
pub mod types;
pub mod workload;

pub use env::{compute_reward, ControlView, FarmEnv, RewardInputs, Step, StepInfo};
pub use error::{Error, Result};
pub use metrics::{summarize_episode, CostConfig, EpisodeSummary};
pub use rng::{stream_rng, SimRng};
pub use sim::{FarmSim, Snapshot};
pub use types::{EpisodeConfig, EpisodeLog, Observation, RewardConfig, RewardTerms, ScalingAction, TaskSpec};
pub use workload::{build_episode_workload, ServiceTimeModel, SizeDistribution, Workload, WorkloadPhaseSpec};

//! Host-side companion of `farmscale-core`: TOML configuration, CSV and JSON
//! file formats, agent checkpoints, the experiment harness and the command
//! line front end.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;

pub use config::Config;
pub use error::{HarnessError, Result};
pub use harness::{EpisodeOutcome, Harness, Policy};

//! Versioned JSON checkpoints of trained agents.

use std::path::Path;

use farmscale_core::agents::{
    Adam, Discretizer, DqnAgent, DqnConfig, Mlp, ObsBounds, QTable, ReplayBuffer, SarsaAgent, SarsaConfig,
    StateKey, TraceTable,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const FORMAT: &str = "farmscale-agent";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentState {
    Sarsa {
        config: SarsaConfig,
        discretizer: Discretizer,
        epsilon: f64,
        q: Vec<(StateKey, [f64; 3])>,
    },
    Dqn {
        config: DqnConfig,
        bounds: ObsBounds,
        epsilon: f64,
        online: Mlp,
        target: Mlp,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub agent: AgentState,
}

impl Checkpoint {
    pub fn from_sarsa(a: &SarsaAgent) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            agent: AgentState::Sarsa {
                config: a.config,
                discretizer: a.discretizer.clone(),
                epsilon: a.epsilon,
                q: a.q.entries().map(|(k, v)| (*k, *v)).collect(),
            },
        }
    }

    pub fn from_dqn(a: &DqnAgent) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            agent: AgentState::Dqn {
                config: a.config.clone(),
                bounds: a.bounds,
                epsilon: a.epsilon,
                online: a.online.clone(),
                target: a.target.clone(),
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.agent {
            AgentState::Sarsa { .. } => "sarsa",
            AgentState::Dqn { .. } => "dqn",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        if c.format != FORMAT {
            return Err(HarnessError::Checkpoint(format!("unexpected format tag {:?}", c.format)));
        }
        if c.version != VERSION {
            return Err(HarnessError::Checkpoint(format!("unsupported version {}", c.version)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Checkpoint(m) => HarnessError::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn into_sarsa(self) -> Result<SarsaAgent> {
        match self.agent {
            AgentState::Sarsa { config, discretizer, epsilon, q } => {
                let discretizer = Discretizer::new(discretizer.edges)?;
                let mut agent = SarsaAgent::new(config, discretizer)?;
                agent.q = QTable::from_entries(q);
                agent.traces = TraceTable::default();
                agent.epsilon = epsilon;
                Ok(agent)
            }
            AgentState::Dqn { .. } => Err(HarnessError::Checkpoint("expected a sarsa checkpoint".into())),
        }
    }

    pub fn into_dqn(self) -> Result<DqnAgent> {
        match self.agent {
            AgentState::Dqn { config, bounds, epsilon, online, target } => {
                config.validate()?;
                let sizes = config.layer_sizes();
                if online.sizes != sizes || target.sizes != sizes {
                    return Err(HarnessError::Checkpoint("network shape does not match its config".into()));
                }
                let online = Mlp::from_params(&online.sizes, online.params)?;
                let target = Mlp::from_params(&target.sizes, target.params)?;
                Ok(DqnAgent {
                    optimizer: Adam::new(online.params.len(), config.lr),
                    buffer: ReplayBuffer::new(config.replay_capacity)?,
                    config,
                    bounds,
                    online,
                    target,
                    epsilon,
                    numeric_fault: false,
                })
            }
            AgentState::Sarsa { .. } => Err(HarnessError::Checkpoint("expected a dqn checkpoint".into())),
        }
    }
}

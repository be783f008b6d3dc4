//! Sparse-reward environments and random tabular MDPs.

mod keydoor;
mod pointpush;
mod tabular;

pub use keydoor::{KeyDoor, KeyDoorConfig, KeyDoorMove, DOOR_REWARD, KEY_REWARD, TREASURE_REWARD};
pub use pointpush::{PointPush, PointPushConfig};
pub use tabular::{random_tabular, TabularMdp};

use serde::{Deserialize, Serialize};

use crate::distributions::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub observation_dim: usize,
    pub action_space: ActionSpace,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub env_reward: f64,
    pub done: bool,
    /// Episode ended because the horizon was reached, not by a terminal event.
    pub truncated: bool,
    pub success: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;
    /// Start a new episode whose layout is fully determined by `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    KeyDoor,
    PointPush,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::KeyDoor => "keydoor",
            EnvKind::PointPush => "pointpush",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keydoor" => Ok(EnvKind::KeyDoor),
            "pointpush" => Ok(EnvKind::PointPush),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

/// Shared environment parameters read from the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub keydoor: KeyDoorConfig,
    pub pointpush: PointPushConfig,
}

impl EnvConfig {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            keydoor: KeyDoorConfig::default(),
            pointpush: PointPushConfig::default(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self.kind {
            EnvKind::KeyDoor => Box::new(KeyDoor::new(self.keydoor)?),
            EnvKind::PointPush => Box::new(PointPush::new(self.pointpush)?),
        })
    }

    pub fn spec(&self) -> Result<EnvSpec> {
        Ok(self.build()?.spec())
    }
}

//! Key → door → treasure gridworld with subtask-gated sparse rewards.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvSpec, Environment, StepResult};
use crate::distributions::Action;
use crate::error::{Error, Result};

pub const KEY_REWARD: f64 = 0.1;
pub const DOOR_REWARD: f64 = 0.1;
pub const TREASURE_REWARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyDoorConfig {
    pub size: usize,
    pub horizon: usize,
}

impl Default for KeyDoorConfig {
    fn default() -> Self {
        Self {
            size: 7,
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyDoorMove {
    Up,
    Down,
    Left,
    Right,
    Interact,
}

impl KeyDoorMove {
    pub const ALL: [KeyDoorMove; 5] = [
        KeyDoorMove::Up,
        KeyDoorMove::Down,
        KeyDoorMove::Left,
        KeyDoorMove::Right,
        KeyDoorMove::Interact,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

type Cell = (usize, usize);

#[derive(Debug, Clone)]
pub struct KeyDoor {
    config: KeyDoorConfig,
    agent: Cell,
    key: Cell,
    door: Cell,
    treasure: Cell,
    has_key: bool,
    door_open: bool,
    t: usize,
    done: bool,
}

impl KeyDoor {
    pub fn new(config: KeyDoorConfig) -> Result<Self> {
        if config.size < 2 || config.horizon == 0 {
            return Err(Error::Config(format!("invalid keydoor config {config:?}")));
        }
        let mut env = Self {
            config,
            agent: (0, 0),
            key: (0, 0),
            door: (0, 0),
            treasure: (0, 0),
            has_key: false,
            door_open: false,
            t: 0,
            done: true,
        };
        env.reset(0);
        Ok(env)
    }

    /// Place every object explicitly (for scripted tests).
    pub fn with_layout(config: KeyDoorConfig, agent: Cell, key: Cell, door: Cell, treasure: Cell) -> Result<Self> {
        let mut env = Self::new(config)?;
        let n = config.size;
        let cells = [agent, key, door, treasure];
        for (i, c) in cells.iter().enumerate() {
            if c.0 >= n || c.1 >= n || cells[..i].contains(c) {
                return Err(Error::Config(format!("invalid layout cell {c:?}")));
            }
        }
        (env.agent, env.key, env.door, env.treasure) = (agent, key, door, treasure);
        Ok(env)
    }

    pub fn agent(&self) -> Cell {
        self.agent
    }
    pub fn key(&self) -> Cell {
        self.key
    }
    pub fn door(&self) -> Cell {
        self.door
    }
    pub fn treasure(&self) -> Cell {
        self.treasure
    }
    pub fn has_key(&self) -> bool {
        self.has_key
    }
    pub fn door_open(&self) -> bool {
        self.door_open
    }
    pub fn config(&self) -> KeyDoorConfig {
        self.config
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = (self.config.size - 1) as f64;
        let mut o = Vec::with_capacity(10);
        for c in [self.agent, self.key, self.door, self.treasure] {
            o.push(c.0 as f64 / s);
            o.push(c.1 as f64 / s);
        }
        o.push(f64::from(u8::from(self.has_key)));
        o.push(f64::from(u8::from(self.door_open)));
        o
    }

    pub fn step_move(&mut self, mv: KeyDoorMove) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        let n = self.config.size;
        let (x, y) = self.agent;
        let mut reward = 0.0;
        let mut success = false;
        match mv {
            KeyDoorMove::Up => self.agent = (x, (y + 1).min(n - 1)),
            KeyDoorMove::Down => self.agent = (x, y.saturating_sub(1)),
            KeyDoorMove::Left => self.agent = (x.saturating_sub(1), y),
            KeyDoorMove::Right => self.agent = ((x + 1).min(n - 1), y),
            KeyDoorMove::Interact => {
                if self.agent == self.key && !self.has_key {
                    self.has_key = true;
                    reward = KEY_REWARD;
                } else if self.agent == self.door && self.has_key && !self.door_open {
                    self.door_open = true;
                    reward = DOOR_REWARD;
                }
            }
        }
        if mv != KeyDoorMove::Interact && self.agent == self.treasure && self.door_open {
            reward = TREASURE_REWARD;
            success = true;
        }
        self.t += 1;
        let truncated = !success && self.t >= self.config.horizon;
        self.done = success || truncated;
        Ok(StepResult {
            next_observation: self.observation(),
            env_reward: reward,
            done: self.done,
            truncated,
            success,
        })
    }
}

impl Environment for KeyDoor {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            observation_dim: 10,
            action_space: ActionSpace::Discrete(5),
            horizon: self.config.horizon,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.config.size;
        let cells: Vec<Cell> = sample(&mut rng, n * n, 4)
            .into_iter()
            .map(|i| (i % n, i / n))
            .collect();
        (self.agent, self.key, self.door, self.treasure) = (cells[0], cells[1], cells[2], cells[3]);
        self.has_key = false;
        self.door_open = false;
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        match action {
            Action::Index(i) if *i < 5 => self.step_move(KeyDoorMove::ALL[*i]),
            other => Err(Error::Domain(format!("keydoor action {other:?}"))),
        }
    }
}

//! Continuous 2-D pusher: a point agent drags a box onto a target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvSpec, Environment, StepResult};
use crate::distributions::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPushConfig {
    /// Arena is `[-half_width, half_width]²`.
    pub half_width: f64,
    pub step_size: f64,
    pub contact_radius: f64,
    pub goal_epsilon: f64,
    pub horizon: usize,
}

impl Default for PointPushConfig {
    fn default() -> Self {
        Self {
            half_width: 0.4,
            step_size: 0.05,
            contact_radius: 0.1,
            goal_epsilon: 0.15,
            horizon: 50,
        }
    }
}

type Vec2 = [f64; 2];

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct PointPush {
    config: PointPushConfig,
    agent: Vec2,
    box_pos: Vec2,
    target: Vec2,
    t: usize,
    done: bool,
    /// Initial layouts thrown away because the box started too close to the target.
    rejected: usize,
}

impl PointPush {
    pub fn new(config: PointPushConfig) -> Result<Self> {
        let c = config;
        if c.horizon == 0
            || c.half_width <= 0.0
            || c.goal_epsilon <= 0.0
            || 2.0 * c.goal_epsilon >= 2.0 * c.half_width
        {
            return Err(Error::Config(format!("invalid pointpush config {c:?}")));
        }
        let mut env = Self {
            config,
            agent: [0.0; 2],
            box_pos: [0.0; 2],
            target: [0.0; 2],
            t: 0,
            done: true,
            rejected: 0,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn agent(&self) -> Vec2 {
        self.agent
    }
    pub fn box_pos(&self) -> Vec2 {
        self.box_pos
    }
    pub fn target(&self) -> Vec2 {
        self.target
    }
    pub fn rejected_layouts(&self) -> usize {
        self.rejected
    }
    pub fn config(&self) -> PointPushConfig {
        self.config
    }

    pub fn observation(&self) -> Vec<f64> {
        let (a, b, g) = (self.agent, self.box_pos, self.target);
        vec![
            a[0],
            a[1],
            b[0],
            b[1],
            g[0],
            g[1],
            b[0] - a[0],
            b[1] - a[1],
            b[0] - g[0],
            b[1] - g[1],
        ]
    }

    fn clamp(&self, p: Vec2) -> Vec2 {
        let h = self.config.half_width;
        [p[0].clamp(-h, h), p[1].clamp(-h, h)]
    }

    pub fn step_xy(&mut self, action: [f64; 2]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("non-finite pointpush action {action:?}")));
        }
        let c = self.config;
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        let moved = self.clamp([
            self.agent[0] + c.step_size * a[0],
            self.agent[1] + c.step_size * a[1],
        ]);
        let disp = [moved[0] - self.agent[0], moved[1] - self.agent[1]];
        self.agent = moved;
        if dist(self.agent, self.box_pos) <= c.contact_radius {
            self.box_pos = self.clamp([self.box_pos[0] + disp[0], self.box_pos[1] + disp[1]]);
        }
        let success = dist(self.box_pos, self.target) <= c.goal_epsilon;
        self.t += 1;
        let truncated = !success && self.t >= c.horizon;
        self.done = success || truncated;
        Ok(StepResult {
            next_observation: self.observation(),
            env_reward: if success { 1.0 } else { 0.0 },
            done: self.done,
            truncated,
            success,
        })
    }

    /// Hand-written controller: approach the box, then drag it toward the target.
    pub fn scripted_action(&self) -> [f64; 2] {
        let to_box = [self.box_pos[0] - self.agent[0], self.box_pos[1] - self.agent[1]];
        let d = dist(self.agent, self.box_pos);
        let dir = if d > 0.5 * self.config.contact_radius {
            to_box
        } else {
            [self.target[0] - self.box_pos[0], self.target[1] - self.box_pos[1]]
        };
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-12);
        [dir[0] / norm, dir[1] / norm]
    }
}

impl Environment for PointPush {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            observation_dim: 10,
            action_space: ActionSpace::Continuous(2),
            horizon: self.config.horizon,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.config.half_width;
        let draw = |rng: &mut ChaCha8Rng| [rng.random_range(-h..h), rng.random_range(-h..h)];
        self.rejected = 0;
        self.agent = draw(&mut rng);
        loop {
            self.box_pos = draw(&mut rng);
            self.target = draw(&mut rng);
            if dist(self.box_pos, self.target) >= 2.0 * self.config.goal_epsilon {
                break;
            }
            self.rejected += 1;
        }
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        match action {
            Action::Real(v) if v.len() == 2 => self.step_xy([v[0], v[1]]),
            other => Err(Error::Domain(format!("pointpush action {other:?}"))),
        }
    }
}

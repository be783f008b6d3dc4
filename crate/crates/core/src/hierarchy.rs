//! Level wiring for modulated hierarchies.
//!
//! Levels are indexed from the bottom: index 0 is the worker that emits
//! environment actions, the last index is the master. Level `k > 0` is active
//! at steps where `t % time_scale == 0` and otherwise holds its previous
//! signal. Each level observes the environment state followed by the signals
//! of every level above it, ordered from `k + 1` up to the master.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{Action, Distribution};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How a level above the worker talks to the levels below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    /// `m` independent bits, appended to lower observations as 0/1 floats.
    Bits(usize),
    /// A categorical choice appended as a one-hot vector.
    OneHot(usize),
    /// A categorical choice that selects which worker network acts; nothing
    /// is appended to the observation.
    Select(usize),
}

impl SignalKind {
    /// Number of columns this signal adds to lower-level observations.
    pub fn appended_width(self) -> usize {
        match self {
            SignalKind::Bits(m) | SignalKind::OneHot(m) => m,
            SignalKind::Select(_) => 0,
        }
    }

    pub fn encode(self, action: &Action) -> Vec<f64> {
        match self {
            SignalKind::Bits(_) => action.features(0),
            SignalKind::OneHot(k) => action.features(k),
            SignalKind::Select(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub time_scale: usize,
    /// `None` for the worker.
    pub signal: Option<SignalKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub levels: Vec<LevelSpec>,
}

impl HierarchySpec {
    /// A single worker with no modulation.
    pub fn flat() -> Self {
        Self {
            levels: vec![LevelSpec {
                time_scale: 1,
                signal: None,
            }],
        }
    }

    /// Worker plus one master with the given clock and signal.
    pub fn two_level(master_time_scale: usize, signal: SignalKind) -> Self {
        Self {
            levels: vec![
                LevelSpec {
                    time_scale: 1,
                    signal: None,
                },
                LevelSpec {
                    time_scale: master_time_scale,
                    signal: Some(signal),
                },
            ],
        }
    }

    /// Bit-vector hierarchy with time scales `1, t_2, …` and widths for levels ≥ 2.
    pub fn bits(time_scales_above_worker: &[usize], widths: &[usize]) -> Result<Self> {
        if time_scales_above_worker.len() != widths.len() {
            return Err(Error::Config("need one signal width per upper level".into()));
        }
        let mut levels = vec![LevelSpec {
            time_scale: 1,
            signal: None,
        }];
        for (&t, &m) in time_scales_above_worker.iter().zip(widths) {
            levels.push(LevelSpec {
                time_scale: t,
                signal: Some(SignalKind::Bits(m)),
            });
        }
        let spec = Self { levels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(worker) = self.levels.first() else {
            return Err(Error::Config("hierarchy has no levels".into()));
        };
        if worker.time_scale != 1 || worker.signal.is_some() {
            return Err(Error::Config("worker must act every step and emit environment actions".into()));
        }
        for (k, pair) in self.levels.windows(2).enumerate() {
            if pair[1].time_scale <= pair[0].time_scale {
                return Err(Error::Config(format!(
                    "time scales must strictly increase upward (level {} has {}, level {} has {})",
                    k + 1,
                    pair[0].time_scale,
                    k + 2,
                    pair[1].time_scale
                )));
            }
        }
        for (k, l) in self.levels.iter().enumerate().skip(1) {
            match l.signal {
                None => return Err(Error::Config(format!("level {} has no signal", k + 1))),
                Some(SignalKind::Bits(0)) => {
                    return Err(Error::Config(format!("level {} has zero-width signal", k + 1)))
                }
                Some(SignalKind::OneHot(n) | SignalKind::Select(n)) if n < 2 => {
                    return Err(Error::Config(format!("level {} needs at least two choices", k + 1)))
                }
                Some(SignalKind::Select(_)) if k != 1 || self.levels.len() != 2 => {
                    return Err(Error::Config("skill selection is only supported for two-level hierarchies".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Observation width of level `k`.
    pub fn obs_dim(&self, k: usize, env_dim: usize) -> usize {
        env_dim
            + self.levels[k + 1..]
                .iter()
                .map(|l| l.signal.map_or(0, SignalKind::appended_width))
                .sum::<usize>()
    }

    /// Number of separate networks at level `k` (skills under a selecting master).
    pub fn branches(&self, k: usize) -> usize {
        match self.levels.get(k + 1).and_then(|l| l.signal) {
            Some(SignalKind::Select(n)) => n,
            _ => 1,
        }
    }

    pub fn is_active(&self, k: usize, t: usize) -> bool {
        t % self.levels[k].time_scale == 0
    }
}

/// Signals currently held by each level above the worker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModulationState {
    /// Indexed by level; entry 0 is always `None`.
    pub signals: Vec<Option<Action>>,
    pub last_activation: Vec<Option<usize>>,
}

impl ModulationState {
    pub fn new(spec: &HierarchySpec) -> Self {
        Self {
            signals: vec![None; spec.num_levels()],
            last_activation: vec![None; spec.num_levels()],
        }
    }

    /// Which network acts at level `k`.
    pub fn branch(&self, spec: &HierarchySpec, k: usize) -> usize {
        match (spec.levels.get(k + 1).and_then(|l| l.signal), self.signals.get(k + 1)) {
            (Some(SignalKind::Select(_)), Some(Some(Action::Index(i)))) => *i,
            _ => 0,
        }
    }
}

/// `[env_state, signal_{k+1}, …, signal_n]`.
pub fn assemble_obs(spec: &HierarchySpec, k: usize, env_state: &[f64], modulation: &ModulationState) -> Result<Vec<f64>> {
    let mut obs = env_state.to_vec();
    for j in k + 1..spec.num_levels() {
        let kind = spec.levels[j].signal.expect("validated");
        let held = modulation.signals[j]
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("level {} has not emitted a signal yet", j + 1)))?;
        obs.extend(kind.encode(held));
    }
    Ok(obs)
}

/// Undiscounted sum of the environment rewards collected while one upper-level
/// decision was held.
pub fn aggregate_master_reward(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

/// Source of per-level action distributions.
pub trait HierarchyPolicy: Sync {
    fn hierarchy(&self) -> &HierarchySpec;
    fn level_distributions(&self, level: usize, branch: usize, obs: &Tensor) -> Result<Vec<Distribution>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub obs: Vec<f64>,
    pub action: Action,
    pub log_prob: f64,
    pub branch: usize,
}

/// Everything that happened at one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub env_obs: Vec<f64>,
    /// Per level; `Some` exactly when the level was active at this step.
    pub decisions: Vec<Option<Decision>>,
    /// Signals held by each level after this step's refresh.
    pub held: Vec<Option<Action>>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<StepTrace>,
    pub final_obs: Vec<f64>,
    /// Ended by a terminal event rather than the horizon.
    pub terminal: bool,
    pub success: bool,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn env_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Advance every environment's hierarchy by one step at time `t`.
///
/// From the master down, each level whose clock fires samples a fresh signal;
/// the others keep theirs. The worker always acts. All entries of `env_states`
/// share the same `t`. Returns the per-level decisions for each environment;
/// the worker's action (entry 0) goes to the environment.
pub fn hierarchy_step<P: HierarchyPolicy + ?Sized>(
    policy: &P,
    t: usize,
    env_states: &[&[f64]],
    modulation: &mut [ModulationState],
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<Vec<Option<Decision>>>> {
    let spec = policy.hierarchy();
    let n_env = env_states.len();
    let n_levels = spec.num_levels();
    let mut out: Vec<Vec<Option<Decision>>> = vec![vec![None; n_levels]; n_env];
    for k in (0..n_levels).rev() {
        if !spec.is_active(k, t) {
            continue;
        }
        let obs: Vec<Vec<f64>> = (0..n_env)
            .map(|e| assemble_obs(spec, k, env_states[e], &modulation[e]))
            .collect::<Result<_>>()?;
        let branches: Vec<usize> = modulation.iter().map(|m| m.branch(spec, k)).collect();
        for b in 0..spec.branches(k) {
            let idx: Vec<usize> = (0..n_env).filter(|&e| branches[e] == b).collect();
            if idx.is_empty() {
                continue;
            }
            let rows: Vec<Vec<f64>> = idx.iter().map(|&e| obs[e].clone()).collect();
            let dists = policy.level_distributions(k, b, &Tensor::from_rows(&rows)?)?;
            for (&e, dist) in idx.iter().zip(&dists) {
                let action = dist.sample(&mut rngs[e]);
                let log_prob = dist.log_prob(&action)?;
                if k > 0 {
                    modulation[e].signals[k] = Some(action.clone());
                    modulation[e].last_activation[k] = Some(t);
                }
                out[e][k] = Some(Decision {
                    obs: obs[e].clone(),
                    action,
                    log_prob,
                    branch: b,
                });
            }
        }
    }
    Ok(out)
}

/// One decision of one level, on that level's own clock.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub obs: Vec<f64>,
    pub action: Action,
    pub log_prob: f64,
    pub branch: usize,
    /// Environment step at which the decision was taken.
    pub t: usize,
    /// Number of environment steps the decision was held for.
    pub span: usize,
    /// Aggregated environment reward over the held interval.
    pub env_reward: f64,
    /// Level observation at the next activation (or episode end), assembled
    /// with the upper signals that were held during this decision.
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
}

/// All decisions of one level within one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelRollout {
    pub records: Vec<LevelRecord>,
}

/// Split an episode into per-level sequences on each level's own clock.
pub fn slice_rollouts(spec: &HierarchySpec, trace: &EpisodeTrace) -> Result<Vec<LevelRollout>> {
    let len = trace.len();
    if len == 0 {
        return Err(Error::Precondition("empty episode trace".into()));
    }
    let mut out = Vec::with_capacity(spec.num_levels());
    for k in 0..spec.num_levels() {
        let starts: Vec<usize> = (0..len).filter(|&t| trace.steps[t].decisions.get(k).is_some_and(Option::is_some)).collect();
        let expected = len.div_ceil(spec.levels[k].time_scale);
        if starts.len() != expected || starts.first() != Some(&0) {
            return Err(Error::Precondition(format!(
                "level {} has {} decisions in a {}-step episode, expected {}",
                k + 1,
                starts.len(),
                len,
                expected
            )));
        }
        let mut records = Vec::with_capacity(starts.len());
        for (i, &t) in starts.iter().enumerate() {
            let end = starts.get(i + 1).copied().unwrap_or(len);
            let d = trace.steps[t].decisions[k].as_ref().expect("checked");
            let rewards: Vec<f64> = trace.steps[t..end].iter().map(|s| s.reward).collect();
            let next_env = if end < len { &trace.steps[end].env_obs } else { &trace.final_obs };
            let held = ModulationState {
                signals: trace.steps[t].held.clone(),
                last_activation: Vec::new(),
            };
            let next_obs = assemble_obs(spec, k, next_env, &held)?;
            let last = end == len;
            records.push(LevelRecord {
                obs: d.obs.clone(),
                action: d.action.clone(),
                log_prob: d.log_prob,
                branch: d.branch,
                t,
                span: end - t,
                env_reward: aggregate_master_reward(&rewards),
                next_obs,
                terminal: last && trace.terminal,
                truncated: last && !trace.terminal,
            });
        }
        out.push(LevelRollout { records });
    }
    Ok(out)
}

//! Agents: flat PPO, options, one-hot modulation and modulated policy
//! hierarchies, all driven by the same per-level learners.

use serde::{Deserialize, Serialize};

use crate::checkpoint::Archive;
use crate::curiosity::{CuriosityAdam, CuriosityConfig, CuriosityModels};
use crate::derive_seed;
use crate::distributions::Distribution;
use crate::envs::{ActionSpace, EnvSpec};
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyPolicy, HierarchySpec, SignalKind};
use crate::nn::{AdamConfig, AdamState, MlpParams};
use crate::policy::{HeadKind, PolicyAdam, PolicyNet};
use crate::ppo::PpoConfig;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    Flat,
    Options,
    OneHot,
    Mph,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Flat, AgentKind::Options, AgentKind::OneHot, AgentKind::Mph];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Flat => "flat",
            AgentKind::Options => "options",
            AgentKind::OneHot => "onehot",
            AgentKind::Mph => "mph",
        }
    }

    pub fn is_hierarchical(self) -> bool {
        self != AgentKind::Flat
    }

    /// Two-level wiring for this kind (a single level for flat).
    pub fn default_hierarchy(self, time_scale: usize, width: usize) -> HierarchySpec {
        match self {
            AgentKind::Flat => HierarchySpec::flat(),
            AgentKind::Options => HierarchySpec::two_level(time_scale, SignalKind::Select(width)),
            AgentKind::OneHot => HierarchySpec::two_level(time_scale, SignalKind::OneHot(width)),
            AgentKind::Mph => HierarchySpec::two_level(time_scale, SignalKind::Bits(width)),
        }
    }

    fn check_hierarchy(self, spec: &HierarchySpec) -> Result<()> {
        let upper: Vec<SignalKind> = spec.levels.iter().filter_map(|l| l.signal).collect();
        let ok = match self {
            AgentKind::Flat => upper.is_empty(),
            AgentKind::Options => matches!(upper[..], [SignalKind::Select(_)]),
            AgentKind::OneHot => matches!(upper[..], [SignalKind::OneHot(_)]),
            AgentKind::Mph => !upper.is_empty() && upper.iter().all(|s| matches!(s, SignalKind::Bits(_))),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("hierarchy does not match agent kind `{}`", self.name())))
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent kind `{s}`")))
    }
}

/// Policy, value net and optimizers for one network of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub policy: PolicyNet,
    pub policy_opt: PolicyAdam,
    pub value: MlpParams,
    pub value_opt: AdamState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curiosity {
    pub models: CuriosityModels,
    pub opt: CuriosityAdam,
}

/// Everything trained at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLearner {
    pub branches: Vec<Branch>,
    pub ppo: PpoConfig,
    pub curiosity_config: CuriosityConfig,
    pub curiosity: Option<Curiosity>,
    pub head: HeadKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub env_spec: EnvSpec,
    pub hierarchy: HierarchySpec,
    pub levels: Vec<LevelLearner>,
}

fn head_for(spec: &HierarchySpec, env: &EnvSpec, k: usize) -> HeadKind {
    match spec.levels[k].signal {
        None => match env.action_space {
            ActionSpace::Discrete(n) => HeadKind::Categorical(n),
            ActionSpace::Continuous(d) => HeadKind::Gaussian(d),
        },
        Some(SignalKind::Bits(m)) => HeadKind::Bernoulli(m),
        Some(SignalKind::OneHot(n) | SignalKind::Select(n)) => HeadKind::Categorical(n),
    }
}

/// Build an agent with freshly initialized networks.
///
/// `ppo` and `curiosity` hold one entry per level, worker first.
pub fn build_agent(
    kind: AgentKind,
    env_spec: EnvSpec,
    hierarchy: &HierarchySpec,
    ppo: &[PpoConfig],
    curiosity: &[CuriosityConfig],
    seed: u64,
) -> Result<Agent> {
    hierarchy.validate()?;
    kind.check_hierarchy(hierarchy)?;
    let n = hierarchy.num_levels();
    if ppo.len() != n || curiosity.len() != n {
        return Err(Error::Config(format!(
            "expected {n} per-level PPO and curiosity configs, got {} and {}",
            ppo.len(),
            curiosity.len()
        )));
    }
    let mut levels = Vec::with_capacity(n);
    for k in 0..n {
        ppo[k].validate()?;
        curiosity[k].validate()?;
        let head = head_for(hierarchy, &env_spec, k);
        let obs_dim = hierarchy.obs_dim(k, env_spec.observation_dim);
        let branches = (0..hierarchy.branches(k))
            .map(|b| {
                let policy = PolicyNet::new(obs_dim, head, derive_seed(seed, &[1, k as u64, b as u64]))?;
                let value = MlpParams::standard(obs_dim, 1, derive_seed(seed, &[2, k as u64, b as u64]))?;
                Ok(Branch {
                    policy_opt: PolicyAdam::new(&policy, ppo[k].lr_policy),
                    value_opt: AdamState::new(&value, AdamConfig::with_lr(ppo[k].lr_value)),
                    policy,
                    value,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let models = if curiosity[k].enabled {
            let models = CuriosityModels::new(
                obs_dim,
                head.action_width(),
                curiosity[k].embed_dim,
                derive_seed(seed, &[3, k as u64]),
            )?;
            Some(Curiosity {
                opt: CuriosityAdam::new(&models, curiosity[k].lr),
                models,
            })
        } else {
            None
        };
        levels.push(LevelLearner {
            branches,
            ppo: ppo[k],
            curiosity_config: curiosity[k],
            curiosity: models,
            head,
        });
    }
    Ok(Agent {
        kind,
        env_spec,
        hierarchy: hierarchy.clone(),
        levels,
    })
}

impl HierarchyPolicy for Agent {
    fn hierarchy(&self) -> &HierarchySpec {
        &self.hierarchy
    }

    fn level_distributions(&self, level: usize, branch: usize, obs: &Tensor) -> Result<Vec<Distribution>> {
        let b = self
            .levels
            .get(level)
            .and_then(|l| l.branches.get(branch))
            .ok_or_else(|| Error::Usage(format!("no network for level {} branch {}", level + 1, branch)))?;
        b.policy.distributions(obs)
    }
}

impl Agent {
    pub fn all_finite(&self) -> bool {
        self.levels.iter().all(|l| {
            l.branches.iter().all(|b| b.policy.all_finite() && b.value.all_finite())
                && l.curiosity.as_ref().is_none_or(|c| {
                    c.models.embed.all_finite() && c.models.forward.all_finite() && c.models.reverse.all_finite()
                })
        })
    }

    /// Network parameters (not optimizer state) as a named archive.
    pub fn to_archive(&self) -> Result<Archive> {
        let mut a = Archive::new();
        for (k, level) in self.levels.iter().enumerate() {
            for (b, br) in level.branches.iter().enumerate() {
                let p = format!("level{k}.branch{b}");
                a.push_mlp(&format!("{p}.policy"), &br.policy.net);
                a.push(format!("{p}.log_std"), Tensor::new(vec![br.policy.log_std.len()], br.policy.log_std.clone())?);
                a.push_mlp(&format!("{p}.value"), &br.value);
            }
            if let Some(c) = &level.curiosity {
                a.push_mlp(&format!("level{k}.embed"), &c.models.embed);
                a.push_mlp(&format!("level{k}.forward"), &c.models.forward);
                a.push_mlp(&format!("level{k}.reverse"), &c.models.reverse);
            }
        }
        Ok(a)
    }

    /// Overwrite network parameters from an archive produced by an agent with
    /// the same configuration.
    pub fn load_archive(&mut self, archive: &Archive) -> Result<()> {
        let fetch = |name: &str, like: &MlpParams| -> Result<MlpParams> {
            let p = archive.get_mlp(name)?;
            if !p.same_shape(like) {
                return Err(Error::Checkpoint(format!("`{name}` has the wrong shape")));
            }
            Ok(p)
        };
        let mut next = self.clone();
        for (k, level) in next.levels.iter_mut().enumerate() {
            for (b, br) in level.branches.iter_mut().enumerate() {
                let p = format!("level{k}.branch{b}");
                br.policy.net = fetch(&format!("{p}.policy"), &br.policy.net)?;
                let ls = archive.get(&format!("{p}.log_std"))?;
                if ls.len() != br.policy.log_std.len() {
                    return Err(Error::Checkpoint(format!("`{p}.log_std` has the wrong length")));
                }
                br.policy.log_std = ls.data().to_vec();
                br.value = fetch(&format!("{p}.value"), &br.value)?;
            }
            if let Some(c) = &mut level.curiosity {
                c.models.embed = fetch(&format!("level{k}.embed"), &c.models.embed)?;
                c.models.forward = fetch(&format!("level{k}.forward"), &c.models.forward)?;
                c.models.reverse = fetch(&format!("level{k}.reverse"), &c.models.reverse)?;
            }
        }
        *self = next;
        Ok(())
    }
}

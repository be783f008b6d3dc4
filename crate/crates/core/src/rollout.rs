//! Batched episode collection and the per-level update round.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::Agent;
use crate::curiosity::TransitionBatch;
use crate::distributions::Action;
use crate::envs::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::hierarchy::{hierarchy_step, slice_rollouts, EpisodeTrace, HierarchyPolicy, LevelRecord, ModulationState, StepTrace};
use crate::ppo::{gae, normalize, ppo_update, AdvantageBatch};
use crate::tensor::Tensor;

/// Seeds for one episode: environment layout and action sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSeed {
    pub reset: u64,
    pub actions: u64,
}

/// Run episodes in lockstep, splitting them into `workers` groups that are
/// collected in parallel. Every episode draws only from its own streams, so
/// the result does not depend on `workers`.
pub fn collect_episodes<P: HierarchyPolicy + ?Sized>(
    policy: &P,
    env: &EnvConfig,
    seeds: &[EpisodeSeed],
    workers: usize,
) -> Result<Vec<EpisodeTrace>> {
    if seeds.is_empty() {
        return Ok(Vec::new());
    }
    let chunk = seeds.len().div_ceil(workers.max(1));
    let parts: Vec<Vec<EpisodeTrace>> = seeds
        .par_chunks(chunk)
        .map(|part| run_lockstep(policy, env, part))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn run_lockstep<P: HierarchyPolicy + ?Sized>(policy: &P, env_cfg: &EnvConfig, seeds: &[EpisodeSeed]) -> Result<Vec<EpisodeTrace>> {
    let spec = policy.hierarchy();
    let mut ids: Vec<usize> = (0..seeds.len()).collect();
    let mut envs: Vec<Box<dyn Environment>> = Vec::with_capacity(seeds.len());
    let mut obs = Vec::with_capacity(seeds.len());
    for s in seeds {
        let mut e = env_cfg.build()?;
        obs.push(e.reset(s.reset));
        envs.push(e);
    }
    let mut mods = vec![ModulationState::new(spec); seeds.len()];
    let mut rngs: Vec<ChaCha8Rng> = seeds.iter().map(|s| ChaCha8Rng::seed_from_u64(s.actions)).collect();
    let mut steps: Vec<Vec<StepTrace>> = vec![Vec::new(); seeds.len()];
    let mut finished: Vec<Option<EpisodeTrace>> = vec![None; seeds.len()];

    let mut t = 0;
    while !ids.is_empty() {
        let states: Vec<&[f64]> = obs.iter().map(Vec::as_slice).collect();
        let decisions = hierarchy_step(policy, t, &states, &mut mods, &mut rngs)?;
        let mut done_slots = Vec::new();
        for (e, d) in decisions.into_iter().enumerate() {
            let action = &d[0].as_ref().expect("worker acts every step").action;
            let r = envs[e].step(action)?;
            let next = r.next_observation;
            steps[e].push(StepTrace {
                env_obs: std::mem::replace(&mut obs[e], next),
                decisions: d,
                held: mods[e].signals.clone(),
                reward: r.env_reward,
            });
            if r.done {
                finished[ids[e]] = Some(EpisodeTrace {
                    steps: std::mem::take(&mut steps[e]),
                    final_obs: obs[e].clone(),
                    terminal: !r.truncated,
                    success: r.success,
                });
                done_slots.push(e);
            }
        }
        for &e in done_slots.iter().rev() {
            ids.remove(e);
            envs.remove(e);
            obs.remove(e);
            mods.remove(e);
            rngs.remove(e);
            steps.remove(e);
        }
        t += 1;
    }
    Ok(finished.into_iter().map(|t| t.expect("every episode ends")).collect())
}

/// Per-level results of one update round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelRoundStats {
    /// Largest post-update mean KL over the level's networks.
    pub mean_kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub curiosity_loss: f64,
    pub intrinsic_mean: f64,
    pub entropy: f64,
    /// Samples that went into each network's update.
    pub branch_samples: Vec<usize>,
}

fn features(records: &[&LevelRecord], width: usize) -> Result<(Tensor, Tensor, Tensor)> {
    let s: Vec<Vec<f64>> = records.iter().map(|r| r.obs.clone()).collect();
    let a: Vec<Vec<f64>> = records.iter().map(|r| r.action.features(width)).collect();
    let n: Vec<Vec<f64>> = records.iter().map(|r| r.next_obs.clone()).collect();
    Ok((Tensor::from_rows(&s)?, Tensor::from_rows(&a)?, Tensor::from_rows(&n)?))
}

/// Slice the episodes per level, add intrinsic rewards, and run PPO followed
/// by the curiosity update on every level.
pub fn train_round(agent: &mut Agent, traces: &[EpisodeTrace]) -> Result<Vec<LevelRoundStats>> {
    if traces.is_empty() {
        return Err(Error::Precondition("no episodes to train on".into()));
    }
    let sliced: Vec<_> = traces
        .iter()
        .map(|t| slice_rollouts(&agent.hierarchy, t))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(agent.levels.len());
    for (k, level) in agent.levels.iter_mut().enumerate() {
        let episodes: Vec<&[LevelRecord]> = sliced.iter().map(|s| s[k].records.as_slice()).collect();
        let records: Vec<&LevelRecord> = episodes.iter().flat_map(|e| e.iter()).collect();
        let width = level.head.action_width();
        let (states, actions, next_states) = features(&records, width)?;
        let transitions = TransitionBatch {
            states,
            actions,
            next_states,
        };
        let mut stats = LevelRoundStats::default();

        let intrinsic = match &level.curiosity {
            Some(c) => c.models.intrinsic_rewards(&transitions, level.curiosity_config.eta)?,
            None => vec![0.0; records.len()],
        };
        stats.intrinsic_mean = intrinsic.iter().sum::<f64>() / records.len() as f64;

        let mut values = vec![0.0; records.len()];
        for (b, br) in level.branches.iter().enumerate() {
            let idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].branch == b).collect();
            if idx.is_empty() {
                continue;
            }
            let v = br.value.forward(&transitions.states.gather_rows(&idx))?;
            for (j, &i) in idx.iter().enumerate() {
                values[i] = v.data()[j];
            }
        }

        let mut advantages = Vec::with_capacity(records.len());
        let mut returns = Vec::with_capacity(records.len());
        let mut offset = 0;
        for ep in &episodes {
            let n = ep.len();
            let rewards: Vec<f64> = (0..n).map(|i| ep[i].env_reward + intrinsic[offset + i]).collect();
            let dones: Vec<bool> = ep.iter().map(|r| r.terminal).collect();
            let last = &ep[n - 1];
            let bootstrap = if last.truncated {
                let next = Tensor::from_rows(std::slice::from_ref(&last.next_obs))?;
                level.branches[last.branch].value.forward(&next)?.data()[0]
            } else {
                0.0
            };
            let (a, r) = gae(
                &rewards,
                &values[offset..offset + n],
                &dones,
                bootstrap,
                level.ppo.gamma,
                level.ppo.gae_lambda,
            )?;
            advantages.extend(a);
            returns.extend(r);
            offset += n;
        }

        let mut updated = 0usize;
        for (b, br) in level.branches.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].branch == b).collect();
            stats.branch_samples.push(idx.len());
            if idx.is_empty() {
                continue;
            }
            let mut adv: Vec<f64> = idx.iter().map(|&i| advantages[i]).collect();
            normalize(&mut adv);
            let batch = AdvantageBatch {
                observations: transitions.states.gather_rows(&idx),
                actions: idx.iter().map(|&i| records[i].action.clone()).collect::<Vec<Action>>(),
                old_log_probs: idx.iter().map(|&i| records[i].log_prob).collect(),
                advantages: adv,
                returns: idx.iter().map(|&i| returns[i]).collect(),
            };
            let s = ppo_update(&mut br.policy, &mut br.policy_opt, &mut br.value, &mut br.value_opt, &batch, &level.ppo)?;
            stats.mean_kl = stats.mean_kl.max(s.mean_kl);
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.entropy += s.entropy;
            updated += 1;
        }
        if updated > 0 {
            let u = updated as f64;
            stats.policy_loss /= u;
            stats.value_loss /= u;
            stats.entropy /= u;
        }

        if let Some(c) = &mut level.curiosity {
            let cfg = level.curiosity_config;
            stats.curiosity_loss = c.models.update(&transitions, &mut c.opt, &cfg, cfg.updates_per_round)?.total;
        }
        out.push(stats);
    }
    Ok(out)
}

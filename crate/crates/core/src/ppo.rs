//! Per-level PPO: GAE, value regression and clipped-surrogate policy updates
//! with KL early stopping.
//!
//! Each epoch is one full-batch Adam step. After every step the batch mean
//! `KL(old ‖ new)` is measured; the first time it exceeds `max_kl` training
//! stops, and if it exceeds `1.5 · max_kl` the step is undone. The accepted
//! policy therefore always satisfies `mean_kl <= 1.5 · max_kl`.

use serde::{Deserialize, Serialize};

use crate::distributions::{Action, Distribution};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, MlpParams};
use crate::policy::{PolicyAdam, PolicyGrads, PolicyNet};
use crate::tensor::Tensor;

/// Accepted rounds never exceed this multiple of the KL target.
pub const KL_HARD_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Target bound on the batch mean `KL(old ‖ new)` per round.
    pub max_kl: f64,
    pub epochs: usize,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub clip: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.985,
            gae_lambda: 0.95,
            max_kl: 0.002,
            epochs: 40,
            lr_policy: 1e-4,
            lr_value: 0.01,
            clip: 0.2,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} not in (0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config(format!("gae_lambda {} not in [0, 1]", self.gae_lambda)));
        }
        if !(self.max_kl > 0.0) {
            return Err(Error::Config(format!("max_kl {} must be positive", self.max_kl)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr_policy >= 0.0 && self.lr_value >= 0.0 && self.clip > 0.0) {
            return Err(Error::Config("learning rates and clip must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generalized advantage estimation over one sequence on a level's own clock.
///
/// `dones[t]` marks a terminal transition (next value 0, recursion reset).
/// If the sequence does not end in a terminal, `bootstrap` is the value of
/// the state following the last step. Returns `(advantages, returns)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::dim("gae", &[n, n], &[values.len(), dones.len()]));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// In-place normalization to zero mean, unit standard deviation.
pub fn normalize(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

#[derive(Debug, Clone)]
pub struct AdvantageBatch {
    pub observations: Tensor,
    pub actions: Vec<Action>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl AdvantageBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.actions.len();
        if n == 0 {
            return Err(Error::Precondition("empty PPO batch".into()));
        }
        if self.observations.rows() != n
            || self.old_log_probs.len() != n
            || self.advantages.len() != n
            || self.returns.len() != n
        {
            return Err(Error::dim(
                "AdvantageBatch",
                &[n],
                &[self.observations.rows(), self.old_log_probs.len(), self.advantages.len()],
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub mean_kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_frac: f64,
    pub entropy: f64,
    pub epochs_run: usize,
    /// The last policy step overshot `1.5 · max_kl` and was undone.
    pub reverted: bool,
}

/// Batch mean of `KL(old ‖ new)`.
pub fn mean_kl(old: &PolicyNet, new: &PolicyNet, observations: &Tensor) -> Result<f64> {
    let a = old.distributions(observations)?;
    let b = new.distributions(observations)?;
    mean_kl_of(&a, &b)
}

fn mean_kl_of(old: &[Distribution], new: &[Distribution]) -> Result<f64> {
    if old.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (p, q) in old.iter().zip(new) {
        s += p.kl(q)?;
    }
    Ok(s / old.len() as f64)
}

/// Clipped surrogate loss `-mean(min(r A, clip(r) A))` and its gradient,
/// evaluated from precomputed head outputs.
fn surrogate_from_outputs(
    policy: &PolicyNet,
    out: &Tensor,
    batch: &AdvantageBatch,
    clip: f64,
) -> Result<(f64, Tensor, Vec<f64>, f64)> {
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut upstream = Tensor::zeros(&[n, out.cols()]);
    let mut d_log_std = vec![0.0; policy.log_std.len()];
    let mut clipped = 0usize;
    for i in 0..n {
        let dist = policy.dist_from_output(out.row(i))?;
        let lp = dist.log_prob(&batch.actions[i])?;
        let ratio = (lp - batch.old_log_probs[i]).exp();
        let a = batch.advantages[i];
        let unclipped = ratio * a;
        let clipped_obj = ratio.clamp(1.0 - clip, 1.0 + clip) * a;
        loss -= unclipped.min(clipped_obj) * inv_n;
        let active = if a >= 0.0 { ratio <= 1.0 + clip } else { ratio >= 1.0 - clip };
        if !active {
            clipped += 1;
            continue;
        }
        // d/dθ of -r A / n = -(A r / n) ∇ log π
        let coeff = -a * ratio * inv_n;
        let (g_out, g_std) = dist.log_prob_grad(&batch.actions[i])?;
        for (u, g) in upstream.row_mut(i).iter_mut().zip(&g_out) {
            *u = coeff * g;
        }
        for (d, g) in d_log_std.iter_mut().zip(&g_std) {
            *d += coeff * g;
        }
    }
    Ok((loss, upstream, d_log_std, clipped as f64 * inv_n))
}

/// Clipped surrogate loss and its exact gradient with respect to every policy
/// parameter.
pub fn surrogate_loss_and_grad(policy: &PolicyNet, batch: &AdvantageBatch, clip: f64) -> Result<(f64, PolicyGrads)> {
    batch.check()?;
    let (out, cache) = policy.net.forward_cached(&batch.observations)?;
    let (loss, upstream, log_std, _) = surrogate_from_outputs(policy, &out, batch, clip)?;
    let (net, _) = policy.net.backward_cached(&cache, &upstream)?;
    Ok((loss, PolicyGrads { net, log_std }))
}

/// Mean squared error of the value net against return targets, and its gradient.
pub fn value_loss_and_grad(value: &MlpParams, obs: &Tensor, returns: &[f64]) -> Result<(f64, MlpParams)> {
    let (out, cache) = value.forward_cached(obs)?;
    let n = returns.len();
    if out.rows() != n || out.cols() != 1 {
        return Err(Error::dim("value net", &[n, 1], out.shape()));
    }
    let mut up = Tensor::zeros(&[n, 1]);
    let mut loss = 0.0;
    for i in 0..n {
        let e = out.data()[i] - returns[i];
        loss += e * e / n as f64;
        up.data_mut()[i] = 2.0 * e / n as f64;
    }
    let (g, _) = value.backward_cached(&cache, &up)?;
    Ok((loss, g))
}

/// One PPO round on a single level (or options branch).
pub fn ppo_update(
    policy: &mut PolicyNet,
    policy_opt: &mut PolicyAdam,
    value: &mut MlpParams,
    value_opt: &mut AdamState,
    batch: &AdvantageBatch,
    config: &PpoConfig,
) -> Result<PpoStats> {
    batch.check()?;
    let snapshot = (policy.clone(), policy_opt.clone(), value.clone(), value_opt.clone());
    let restore = |policy: &mut PolicyNet, policy_opt: &mut PolicyAdam, value: &mut MlpParams, value_opt: &mut AdamState| {
        *policy = snapshot.0.clone();
        *policy_opt = snapshot.1.clone();
        *value = snapshot.2.clone();
        *value_opt = snapshot.3.clone();
    };
    let mut stats = PpoStats::default();

    let (mut out, mut cache) = policy.net.forward_cached(&batch.observations)?;
    let old_dists = policy.dists_from_outputs(&out)?;
    stats.entropy = old_dists.iter().map(Distribution::entropy).sum::<f64>() / batch.len() as f64;

    // A non-positive KL budget freezes the policy.
    if config.max_kl > 0.0 {
        for _ in 0..config.epochs {
            let (loss, upstream, d_log_std, clip_frac) = surrogate_from_outputs(policy, &out, batch, config.clip)?;
            if !loss.is_finite() {
                restore(policy, policy_opt, value, value_opt);
                return Err(Error::NonFinite("PPO surrogate loss".into()));
            }
            stats.policy_loss = loss;
            stats.clip_frac = clip_frac;
            let (g_net, _) = policy.net.backward_cached(&cache, &upstream)?;
            let prev = (policy.clone(), policy_opt.clone());
            policy_opt.step(
                policy,
                &PolicyGrads {
                    net: g_net,
                    log_std: d_log_std,
                },
            )?;
            stats.epochs_run += 1;
            if !policy.all_finite() {
                restore(policy, policy_opt, value, value_opt);
                return Err(Error::NonFinite("policy parameters".into()));
            }
            let (new_out, new_cache) = policy.net.forward_cached(&batch.observations)?;
            let new_dists = policy.dists_from_outputs(&new_out)?;
            let kl = mean_kl_of(&old_dists, &new_dists)?;
            if kl > config.max_kl {
                if kl > KL_HARD_FACTOR * config.max_kl {
                    (*policy, *policy_opt) = prev;
                    stats.reverted = true;
                    stats.mean_kl = mean_kl_of(&old_dists, &policy.distributions(&batch.observations)?)?;
                } else {
                    stats.mean_kl = kl;
                }
                break;
            }
            stats.mean_kl = kl;
            (out, cache) = (new_out, new_cache);
        }
    }

    for _ in 0..config.epochs {
        let (loss, g) = value_loss_and_grad(value, &batch.observations, &batch.returns)?;
        if !loss.is_finite() {
            restore(policy, policy_opt, value, value_opt);
            return Err(Error::NonFinite("value loss".into()));
        }
        stats.value_loss = loss;
        adam_step(value, &g, value_opt)?;
    }
    if !value.all_finite() {
        restore(policy, policy_opt, value, value_opt);
        return Err(Error::NonFinite("value parameters".into()));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::AdamConfig;
    use crate::policy::HeadKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Non-recursive oracle: A_t = Σ_l (γλ)^l δ_{t+l}.
    fn gae_oracle(r: &[f64], v: &[f64], boot: f64, terminal: bool, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let next_v = |t: usize| {
            if t + 1 < n {
                v[t + 1]
            } else if terminal {
                0.0
            } else {
                boot
            }
        };
        let deltas: Vec<f64> = (0..n).map(|t| r[t] + g * next_v(t) - v[t]).collect();
        (0..n)
            .map(|t| (t..n).map(|k| (g * l).powi((k - t) as i32) * deltas[k]).sum())
            .collect()
    }

    #[test]
    fn gae_zero() {
        let (a, r) = gae(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95).unwrap();
        assert!(a.iter().chain(&r).all(|&x| x == 0.0));
    }

    #[test]
    fn gae_single_terminal_step() {
        let (a, r) = gae(&[1.0], &[0.0], &[true], 123.0, 0.99, 0.95).unwrap();
        assert_eq!((a[0], r[0]), (1.0, 1.0));
    }

    #[test]
    fn gae_matches_delta_sum_oracle() {
        let r = [0.0, 0.1, 0.0, 1.0];
        let v = [0.3, -0.2, 0.5, 0.25];
        for (terminal, boot) in [(true, 0.0), (false, 0.7)] {
            let mut d = [false; 4];
            d[3] = terminal;
            let (a, _) = gae(&r, &v, &d, boot, 0.985, 0.95).unwrap();
            let o = gae_oracle(&r, &v, boot, terminal, 0.985, 0.95);
            for t in 0..4 {
                assert!((a[t] - o[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gae_lambda_one_is_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..30);
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let boot = rng.random_range(-1.0..1.0);
            let g = 0.97;
            let (a, _) = gae(&r, &v, &vec![false; n], boot, g, 1.0).unwrap();
            for t in 0..n {
                let mc: f64 = (t..n).map(|k| g.powi((k - t) as i32) * r[k]).sum::<f64>()
                    + g.powi((n - t) as i32) * boot;
                assert!((a[t] - (mc - v[t])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gae_length_mismatch() {
        assert!(gae(&[0.0; 3], &[0.0; 2], &[false; 3], 0.0, 0.9, 0.9).is_err());
    }

    fn bandit_batch(adv: f64, n: usize) -> (PolicyNet, AdvantageBatch) {
        let policy = PolicyNet::new(2, HeadKind::Categorical(2), 3).unwrap();
        let obs = Tensor::new(vec![n, 2], (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
        let dists = policy.distributions(&obs).unwrap();
        let actions: Vec<Action> = (0..n).map(|i| Action::Index(i % 2)).collect();
        let old: Vec<f64> = actions.iter().zip(&dists).map(|(a, d)| d.log_prob(a).unwrap()).collect();
        let advantages = actions
            .iter()
            .map(|a| if *a == Action::Index(0) { adv } else { -adv })
            .collect();
        let batch = AdvantageBatch {
            observations: obs,
            actions,
            old_log_probs: old,
            advantages,
            returns: vec![0.0; n],
        };
        (policy, batch)
    }

    fn run(policy: &mut PolicyNet, batch: &AdvantageBatch, cfg: &PpoConfig) -> PpoStats {
        let mut popt = PolicyAdam::new(policy, cfg.lr_policy);
        let mut value = MlpParams::standard(2, 1, 9).unwrap();
        let mut vopt = AdamState::new(&value, AdamConfig::with_lr(cfg.lr_value));
        ppo_update(policy, &mut popt, &mut value, &mut vopt, batch, cfg).unwrap()
    }

    #[test]
    fn zero_advantage_leaves_policy() {
        let (mut p, b) = bandit_batch(0.0, 8);
        let before = p.clone();
        let stats = run(&mut p, &b, &PpoConfig::default());
        assert_eq!(p, before);
        assert_eq!(stats.mean_kl, 0.0);
    }

    #[test]
    fn zero_kl_budget_freezes_policy() {
        let (mut p, b) = bandit_batch(1.0, 8);
        let before = p.clone();
        let cfg = PpoConfig {
            max_kl: 0.0,
            ..PpoConfig::default()
        };
        let stats = run(&mut p, &b, &cfg);
        assert_eq!(p, before);
        assert_eq!(stats.epochs_run, 0);
    }

    #[test]
    fn positive_advantage_raises_probability() {
        let (mut p, b) = bandit_batch(1.0, 8);
        let probs = |p: &PolicyNet| match &p.distributions(&b.observations).unwrap()[0] {
            Distribution::Categorical(c) => c.probs()[0],
            _ => unreachable!(),
        };
        let before = probs(&p);
        let cfg = PpoConfig {
            lr_policy: 1e-3,
            ..PpoConfig::default()
        };
        let stats = run(&mut p, &b, &cfg);
        assert!(probs(&p) > before);
        assert!(stats.mean_kl <= KL_HARD_FACTOR * cfg.max_kl);
    }

    #[test]
    fn kl_contract_under_aggressive_lr() {
        for seed in 0..5 {
            let (mut p, mut b) = bandit_batch(1.0, 16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.advantages.iter_mut().for_each(|a| *a *= rng.random_range(0.5..2.0));
            let before = p.clone();
            let cfg = PpoConfig {
                lr_policy: 0.05,
                max_kl: 0.001,
                ..PpoConfig::default()
            };
            let stats = run(&mut p, &b, &cfg);
            let kl = mean_kl(&before, &p, &b.observations).unwrap();
            assert!((kl - stats.mean_kl).abs() < 1e-12);
            assert!(kl <= KL_HARD_FACTOR * cfg.max_kl);
        }
    }

    #[test]
    fn mean_kl_matches_scalar_loop() {
        let a = PolicyNet::new(3, HeadKind::Bernoulli(3), 1).unwrap();
        let b = PolicyNet::new(3, HeadKind::Bernoulli(3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = Tensor::new(vec![6, 3], (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let got = mean_kl(&a, &b, &obs).unwrap();
        let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
        let oa = a.net.forward(&obs).unwrap();
        let ob = b.net.forward(&obs).unwrap();
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..3 {
                let p = sigmoid(oa.row(i)[j]);
                let q = sigmoid(ob.row(i)[j]);
                s += p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
            }
        }
        assert!((got - s / 6.0).abs() < 1e-12);
        assert_eq!(mean_kl(&a, &a, &obs).unwrap(), 0.0);
    }

    #[test]
    fn empty_batch_rejected() {
        let (mut p, mut b) = bandit_batch(1.0, 2);
        b.actions.clear();
        let mut popt = PolicyAdam::new(&p, 1e-3);
        let mut value = MlpParams::standard(2, 1, 9).unwrap();
        let mut vopt = AdamState::new(&value, AdamConfig::with_lr(1e-3));
        assert!(ppo_update(&mut p, &mut popt, &mut value, &mut vopt, &b, &PpoConfig::default()).is_err());
    }
}

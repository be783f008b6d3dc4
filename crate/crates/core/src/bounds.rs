//! Exact tabular check of the kernel-drift bound.
//!
//! A hierarchy over a finite MDP is described by per-level action counts
//! `A_1..A_n` (`A_1` acts on the environment) and policy tables. The state of
//! level `k` is the environment state plus the tuple of actions held by all
//! levels above it, encoded as a context index `c_k`. Going down one level,
//! `c_{k-1} = a_k + A_k * c_k`.
//!
//! The kernel of level `k` comes from marginalizing the level below over its
//! policy:
//!
//! `p_k(s' | s, c_k, a_k) = Σ_a p_{k-1}(s' | s, (a_k, c_k), a) π_{k-1}(a | s, (a_k, c_k))`
//!
//! If every policy row moves by at most `δ_i` in KL(old‖new), then
//! `max |p_k - p'_k| ≤ Σ_{i<k} √(δ_i / 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::envs::{random_tabular, TabularMdp};
use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-10;
const MAX_BISECTION: usize = 100;

/// Conditional action distributions indexed `[context][state][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub contexts: usize,
    pub states: usize,
    pub actions: usize,
    pub probs: Vec<f64>,
}

fn check_rows(data: &[f64], width: usize, tol: f64, what: &str) -> Result<()> {
    for (i, row) in data.chunks(width).enumerate() {
        if row.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain(format!("{what} row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::Domain(format!("{what} row {i} sums to {s}")));
        }
    }
    Ok(())
}

impl PolicyTable {
    pub fn new(contexts: usize, states: usize, actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != contexts * states * actions {
            return Err(Error::dim("policy table", &[contexts, states, actions], &[probs.len()]));
        }
        check_rows(&probs, actions, 1e-12, "policy")?;
        Ok(Self {
            contexts,
            states,
            actions,
            probs,
        })
    }

    /// Softmax of standard normal logits scaled by `temperature`.
    pub fn random(contexts: usize, states: usize, actions: usize, temperature: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probs = Vec::with_capacity(contexts * states * actions);
        for _ in 0..contexts * states {
            let logits: Vec<f64> = (0..actions)
                .map(|_| temperature * rng.sample::<f64, _>(StandardNormal))
                .collect();
            probs.extend(softmax(&logits));
        }
        Self::new(contexts, states, actions, probs)
    }

    /// Point mass on `action` everywhere.
    pub fn deterministic(contexts: usize, states: usize, actions: usize, action: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let mut probs = vec![0.0; contexts * states * actions];
        for c in 0..contexts {
            for s in 0..states {
                probs[(c * states + s) * actions + action(c, s)] = 1.0;
            }
        }
        Self::new(contexts, states, actions, probs)
    }

    pub fn uniform(contexts: usize, states: usize, actions: usize) -> Result<Self> {
        Self::new(contexts, states, actions, vec![1.0 / actions as f64; contexts * states * actions])
    }

    pub fn row(&self, c: usize, s: usize) -> &[f64] {
        let o = (c * self.states + s) * self.actions;
        &self.probs[o..o + self.actions]
    }

    pub fn prob(&self, c: usize, s: usize, a: usize) -> f64 {
        self.probs[(c * self.states + s) * self.actions + a]
    }
}

/// Transition table indexed `[context][state][action][next state]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelKernel {
    pub contexts: usize,
    pub states: usize,
    pub actions: usize,
    pub time_scale: usize,
    pub probs: Vec<f64>,
}

impl LevelKernel {
    pub fn new(contexts: usize, states: usize, actions: usize, time_scale: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != contexts * states * actions * states {
            return Err(Error::dim("level kernel", &[contexts, states, actions, states], &[probs.len()]));
        }
        check_rows(&probs, states, ROW_TOL, "kernel")?;
        Ok(Self {
            contexts,
            states,
            actions,
            time_scale,
            probs,
        })
    }

    /// The environment kernel, identical for every context.
    pub fn from_env(env: &TabularMdp, contexts: usize) -> Result<Self> {
        let mut probs = Vec::with_capacity(contexts * env.kernel().len());
        for _ in 0..contexts {
            probs.extend_from_slice(env.kernel());
        }
        Self::new(contexts, env.num_states, env.num_actions, 1, probs)
    }

    pub fn row(&self, c: usize, s: usize, a: usize) -> &[f64] {
        let o = ((c * self.states + s) * self.actions + a) * self.states;
        &self.probs[o..o + self.states]
    }

    pub fn prob(&self, c: usize, s: usize, a: usize, next: usize) -> f64 {
        self.row(c, s, a)[next]
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &LevelKernel) -> Result<f64> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::dim("kernel difference", &[self.probs.len()], &[other.probs.len()]));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// KL(p‖q) for discrete distributions.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Kernel of the level above `p`, marginalizing over `policy`.
/// `upper_actions` is the action count of the new level.
pub fn marginalize_kernel(p: &LevelKernel, policy: &PolicyTable, upper_actions: usize) -> Result<LevelKernel> {
    if policy.contexts != p.contexts || policy.states != p.states || policy.actions != p.actions {
        return Err(Error::dim(
            "marginalize_kernel",
            &[p.contexts, p.states, p.actions],
            &[policy.contexts, policy.states, policy.actions],
        ));
    }
    if upper_actions == 0 || p.contexts % upper_actions != 0 {
        return Err(Error::Config(format!(
            "{} contexts cannot be split by {upper_actions} upper actions",
            p.contexts
        )));
    }
    let contexts = p.contexts / upper_actions;
    let n = p.states;
    let mut probs = vec![0.0; contexts * n * upper_actions * n];
    for c in 0..contexts {
        for s in 0..n {
            for u in 0..upper_actions {
                let lower_c = u + upper_actions * c;
                let out = &mut probs[((c * n + s) * upper_actions + u) * n..][..n];
                for a in 0..p.actions {
                    let w = policy.prob(lower_c, s, a);
                    for (o, v) in out.iter_mut().zip(p.row(lower_c, s, a)) {
                        *o += w * v;
                    }
                }
            }
        }
    }
    LevelKernel::new(contexts, n, upper_actions, p.time_scale, probs)
}

/// The state chain induced by `policy` on `p`, per context: `[c][s][s']`.
fn induced_chains(p: &LevelKernel, policy: &PolicyTable) -> Vec<f64> {
    let n = p.states;
    let mut m = vec![0.0; p.contexts * n * n];
    for c in 0..p.contexts {
        for s in 0..n {
            let out = &mut m[(c * n + s) * n..][..n];
            for a in 0..p.actions {
                let w = policy.prob(c, s, a);
                for (o, v) in out.iter_mut().zip(p.row(c, s, a)) {
                    *o += w * v;
                }
            }
        }
    }
    m
}

/// Transition over `time_scale` steps: the first step takes the given action,
/// the remaining ones follow `policy` with the context held fixed.
pub fn timescale_kernel(p: &LevelKernel, policy: &PolicyTable, time_scale: usize) -> Result<LevelKernel> {
    if time_scale == 0 {
        return Err(Error::Config("time scale must be at least 1".into()));
    }
    if policy.contexts != p.contexts || policy.states != p.states || policy.actions != p.actions {
        return Err(Error::dim(
            "timescale_kernel",
            &[p.contexts, p.states, p.actions],
            &[policy.contexts, policy.states, policy.actions],
        ));
    }
    let n = p.states;
    let chains = induced_chains(p, policy);
    let mut probs = p.probs.clone();
    for _ in 1..time_scale {
        let mut next = vec![0.0; probs.len()];
        for c in 0..p.contexts {
            let m = &chains[c * n * n..][..n * n];
            for s in 0..n {
                for a in 0..p.actions {
                    let base = ((c * n + s) * p.actions + a) * n;
                    let row = &probs[base..base + n];
                    let out = &mut next[base..base + n];
                    for (mid, w) in row.iter().enumerate() {
                        for (o, v) in out.iter_mut().zip(&m[mid * n..(mid + 1) * n]) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
        probs = next;
    }
    LevelKernel::new(p.contexts, n, p.actions, time_scale, probs)
}

/// Move one row along `direction` in logit space so that KL(row‖result) lands
/// in `[0.9 δ, δ]`. Returns the scale and the perturbed row.
pub fn perturb_row(row: &[f64], direction: &[f64], delta: f64) -> Result<(f64, Vec<f64>)> {
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("KL budget must be positive, got {delta}")));
    }
    let logits: Vec<f64> = row.iter().map(|p| p.ln()).collect();
    let at = |scale: f64| softmax(&logits.iter().zip(direction).map(|(l, d)| l + scale * d).collect::<Vec<_>>());
    let kl = |scale: f64| kl_discrete(row, &at(scale));
    let mut hi = 1.0;
    let mut iters = 0;
    while kl(hi) < 0.9 * delta {
        hi *= 2.0;
        iters += 1;
        if iters > MAX_BISECTION {
            return Err(Error::NonConvergence("perturbation direction does not move the row".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        let v = kl(mid);
        if (0.9 * delta..=delta).contains(&v) {
            return Ok((mid, at(mid)));
        }
        if v > delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let v = kl(hi);
    if (0.9 * delta..=delta).contains(&v) {
        return Ok((hi, at(hi)));
    }
    Err(Error::NonConvergence(format!("bisection did not reach the KL band for δ = {delta}")))
}

/// Perturb every row of `policy` so that its KL from the original lies in
/// `[0.9 δ, δ]`.
pub fn kl_projected_perturbation(policy: &PolicyTable, delta: f64, seed: u64) -> Result<PolicyTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = Vec::with_capacity(policy.probs.len());
    for row in policy.probs.chunks(policy.actions) {
        let direction = loop {
            let d: Vec<f64> = (0..policy.actions).map(|_| rng.sample(StandardNormal)).collect();
            let mean: f64 = row.iter().zip(&d).map(|(p, x)| p * x).sum();
            let var: f64 = row.iter().zip(&d).map(|(p, x)| p * (x - mean).powi(2)).sum();
            if var > 1e-6 {
                break d;
            }
        };
        probs.extend(perturb_row(row, &direction, delta)?.1);
    }
    PolicyTable::new(policy.contexts, policy.states, policy.actions, probs)
}

/// A hierarchy of tabular policies over one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularHierarchy {
    pub env: TabularMdp,
    /// Action count per level, worker first.
    pub action_counts: Vec<usize>,
    /// One table per level, worker first.
    pub policies: Vec<PolicyTable>,
}

impl TabularHierarchy {
    pub fn new(env: TabularMdp, action_counts: Vec<usize>, policies: Vec<PolicyTable>) -> Result<Self> {
        let n = action_counts.len();
        if n == 0 || action_counts[0] != env.num_actions {
            return Err(Error::Config("worker action count must match the environment".into()));
        }
        if policies.len() != n {
            return Err(Error::dim("tabular hierarchy", &[n], &[policies.len()]));
        }
        let h = Self {
            env,
            action_counts,
            policies,
        };
        for k in 0..n {
            let p = &h.policies[k];
            let want = [h.contexts(k), h.env.num_states, h.action_counts[k]];
            if [p.contexts, p.states, p.actions] != want {
                return Err(Error::dim("level policy", &want, &[p.contexts, p.states, p.actions]));
            }
        }
        Ok(h)
    }

    /// Random policies on a given environment.
    pub fn random(env: TabularMdp, action_counts: Vec<usize>, seed: u64) -> Result<Self> {
        let n = action_counts.len();
        let policies = (0..n)
            .map(|k| {
                let contexts = action_counts[k + 1..].iter().product();
                PolicyTable::random(contexts, env.num_states, action_counts[k], 1.5, derive_seed(seed, &[k as u64]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(env, action_counts, policies)
    }

    pub fn num_levels(&self) -> usize {
        self.action_counts.len()
    }

    pub fn contexts(&self, k: usize) -> usize {
        self.action_counts[k + 1..].iter().product()
    }

    /// One-step kernels `p_1..p_n`.
    pub fn kernels(&self) -> Result<Vec<LevelKernel>> {
        let mut out = vec![LevelKernel::from_env(&self.env, self.contexts(0))?];
        for k in 1..self.num_levels() {
            let next = marginalize_kernel(&out[k - 1], &self.policies[k - 1], self.action_counts[k])?;
            out.push(next);
        }
        Ok(out)
    }

    /// Same environment, every level perturbed to its KL budget.
    pub fn perturbed(&self, deltas: &[f64], seed: u64) -> Result<Self> {
        if deltas.len() != self.num_levels() {
            return Err(Error::dim("perturbation budgets", &[self.num_levels()], &[deltas.len()]));
        }
        let policies = self
            .policies
            .iter()
            .zip(deltas)
            .enumerate()
            .map(|(k, (p, &d))| kl_projected_perturbation(p, d, derive_seed(seed, &[k as u64])))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.env.clone(), self.action_counts.clone(), policies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDrift {
    /// 1-based level index.
    pub level: usize,
    pub drift: f64,
    pub bound: f64,
    pub slack: f64,
    /// Largest `Σ_a p_{k-1}(s'|·,a) |π_{k-1} - π'_{k-1}|(a)` over rows.
    pub hoelder: f64,
    /// Drift of the kernel over this level's time scale (reported, not bounded).
    pub time_scale: usize,
    pub timescaled_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub deltas: Vec<f64>,
    /// Largest realized per-row KL(old‖new) per level.
    pub max_row_kl: Vec<f64>,
    /// Levels 2..n.
    pub levels: Vec<LevelDrift>,
    pub pass: bool,
}

/// `Σ_{i<k} √(δ_i / 2)` for `k = 2..=n`.
pub fn drift_bounds(deltas: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::new();
    for d in &deltas[..deltas.len().saturating_sub(1)] {
        acc += (d / 2.0).sqrt();
        out.push(acc);
    }
    out
}

/// Compare one-step kernels of `old` and `new` against the drift bound.
/// `time_scales` gives `T_k` per level and only affects the reported
/// time-scaled drift.
pub fn verify_drift_bound(old: &TabularHierarchy, new: &TabularHierarchy, deltas: &[f64], time_scales: &[usize]) -> Result<DriftReport> {
    let n = old.num_levels();
    if new.action_counts != old.action_counts || new.env != old.env {
        return Err(Error::Config("hierarchies differ in structure".into()));
    }
    if deltas.len() != n || time_scales.len() != n {
        return Err(Error::dim("drift check", &[n, n], &[deltas.len(), time_scales.len()]));
    }
    let mut max_row_kl = Vec::with_capacity(n);
    for k in 0..n {
        let (p, q) = (&old.policies[k], &new.policies[k]);
        let worst = p
            .probs
            .chunks(p.actions)
            .zip(q.probs.chunks(q.actions))
            .map(|(a, b)| kl_discrete(a, b))
            .fold(0.0, f64::max);
        if worst > deltas[k] * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "level {} policy moved by KL {worst:.3e}, above its budget {:.3e}",
                k + 1,
                deltas[k]
            )));
        }
        max_row_kl.push(worst);
    }
    let kp = old.kernels()?;
    let kq = new.kernels()?;
    let bounds = drift_bounds(deltas);
    let mut levels = Vec::with_capacity(n.saturating_sub(1));
    let mut pass = true;
    for k in 1..n {
        let drift = kp[k].max_abs_diff(&kq[k])?;
        let below = &kp[k - 1];
        let (pi, pi2) = (&old.policies[k - 1], &new.policies[k - 1]);
        let mut hoelder: f64 = 0.0;
        for c in 0..below.contexts {
            for s in 0..below.states {
                for next in 0..below.states {
                    let v: f64 = (0..below.actions)
                        .map(|a| below.prob(c, s, a, next) * (pi.prob(c, s, a) - pi2.prob(c, s, a)).abs())
                        .sum();
                    hoelder = hoelder.max(v);
                }
            }
        }
        let t = time_scales[k];
        let timescaled_drift = timescale_kernel(&kp[k], &old.policies[k], t)?.max_abs_diff(&timescale_kernel(&kq[k], &new.policies[k], t)?)?;
        let bound = bounds[k - 1];
        pass &= drift <= bound + 1e-12;
        levels.push(LevelDrift {
            level: k + 1,
            drift,
            bound,
            slack: bound - drift,
            hoelder,
            time_scale: t,
            timescaled_drift,
        });
    }
    Ok(DriftReport {
        deltas: deltas.to_vec(),
        max_row_kl,
        levels,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub instances: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_levels: usize,
    /// Per-level KL budgets (worker first). A single value applies to every
    /// level; `None` draws log-uniform budgets in `[1e-4, 1e-1]`.
    pub deltas: Option<Vec<f64>>,
    pub ergodic_floor: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_states: 6,
            max_actions: 4,
            max_levels: 3,
            deltas: None,
            ergodic_floor: 0.01,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_states < 2 || self.max_states > 10 {
            return Err(Error::Config("max_states must be in 2..=10".into()));
        }
        if self.max_actions < 2 || self.max_actions > 5 {
            return Err(Error::Config("max_actions must be in 2..=5".into()));
        }
        if self.max_levels < 2 || self.max_levels > 3 {
            return Err(Error::Config("max_levels must be 2 or 3".into()));
        }
        if let Some(d) = &self.deltas {
            if d.is_empty() || d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config("KL budgets must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: usize,
    pub states: usize,
    pub action_counts: Vec<usize>,
    pub report: DriftReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub violations: usize,
    /// Largest drift / bound ratio per level (index 0 is level 2).
    pub max_ratio: Vec<f64>,
    pub instances: Vec<InstanceReport>,
}

fn run_instance(cfg: &CampaignConfig, index: usize) -> Result<InstanceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[index as u64]));
    let states = rng.random_range(2..=cfg.max_states);
    let levels = rng.random_range(2..=cfg.max_levels);
    let action_counts: Vec<usize> = (0..levels).map(|_| rng.random_range(2..=cfg.max_actions)).collect();
    let deltas: Vec<f64> = match &cfg.deltas {
        Some(d) if d.len() == 1 => vec![d[0]; levels],
        Some(d) if d.len() >= levels => d[..levels].to_vec(),
        Some(d) => {
            let last = *d.last().expect("validated non-empty");
            (0..levels).map(|k| d.get(k).copied().unwrap_or(last)).collect()
        }
        None => (0..levels).map(|_| 10f64.powf(rng.random_range(-4.0..-1.0))).collect(),
    };
    let floor = cfg.ergodic_floor.min(0.5 / states as f64);
    let env = random_tabular(states, action_counts[0], rng.random(), floor)?;
    let old = TabularHierarchy::random(env, action_counts.clone(), rng.random())?;
    let new = old.perturbed(&deltas, rng.random())?;
    let time_scales: Vec<usize> = (0..levels).map(|k| 1 << (2 * k)).collect();
    let report = verify_drift_bound(&old, &new, &deltas, &time_scales)?;
    Ok(InstanceReport {
        index,
        states,
        action_counts,
        report,
    })
}

impl CampaignReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Independent random instances, each with its own seed stream.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let instances: Vec<InstanceReport> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| run_instance(cfg, i))
        .collect::<Result<_>>()?;
    let violations = instances.iter().filter(|r| !r.report.pass).count();
    let mut max_ratio = vec![0.0; cfg.max_levels - 1];
    for inst in &instances {
        for (j, l) in inst.report.levels.iter().enumerate() {
            max_ratio[j] = f64::max(max_ratio[j], l.drift / l.bound);
        }
    }
    Ok(CampaignReport {
        config: cfg.clone(),
        violations,
        max_ratio,
        instances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveRound {
    pub round: usize,
    pub delta: f64,
    pub cap: f64,
    pub drift: f64,
    pub pass: bool,
}

/// Feed realized per-round worker KLs into a two-level surrogate: each round's
/// KL becomes the perturbation budget and `√(δ/2)` the drift cap.
pub fn live_training_check(worker_kls: &[f64], states: usize, actions: usize, seed: u64) -> Result<Vec<LiveRound>> {
    worker_kls
        .iter()
        .enumerate()
        .map(|(round, &delta)| {
            if !(delta >= 0.0) {
                return Err(Error::Domain(format!("round {round} has KL {delta}")));
            }
            let s = derive_seed(seed, &[round as u64]);
            let env = random_tabular(states, actions, s, 0.5 / states as f64)?;
            let old = TabularHierarchy::random(env, vec![actions, 2], derive_seed(s, &[1]))?;
            let new = if delta > 0.0 {
                let mut p = old.clone();
                p.policies[0] = kl_projected_perturbation(&old.policies[0], delta, derive_seed(s, &[2]))?;
                p
            } else {
                old.clone()
            };
            let r = verify_drift_bound(&old, &new, &[delta, 0.0], &[1, 4])?;
            let l = &r.levels[0];
            Ok(LiveRound {
                round,
                delta,
                cap: l.bound,
                drift: l.drift,
                pass: r.pass,
            })
        })
        .collect()
}

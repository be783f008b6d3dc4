//! Run configuration, the training loop, evaluation, modulation histograms and
//! intrinsic-motivation ablations.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{build_agent, Agent, AgentKind};
use crate::curiosity::CuriosityConfig;
use crate::derive_seed;
use crate::distributions::Action;
use crate::envs::{EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyPolicy, HierarchySpec, SignalKind};
use crate::ppo::PpoConfig;
use crate::rollout::{collect_episodes, train_round, EpisodeSeed, LevelRoundStats};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LAST_GOOD_FILE: &str = "last_good.bin";
pub const CONFIG_FILE: &str = "config.txt";
pub const HISTOGRAM_FILE: &str = "histogram.tsv";
pub const ABLATION_FILE: &str = "ablation.csv";

const TAG_TRAIN_RESET: u64 = 10;
const TAG_TRAIN_ACTIONS: u64 = 11;
const TAG_EVAL_RESET: u64 = 20;
const TAG_EVAL_ACTIONS: u64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentKind,
    /// Time scales of the levels above the worker, bottom first.
    pub time_scales: Vec<usize>,
    /// Signal width (bits or skills) of each level above the worker.
    pub widths: Vec<usize>,
    pub ppo_worker: PpoConfig,
    pub ppo_master: PpoConfig,
    pub curiosity_worker: CuriosityConfig,
    pub curiosity_master: CuriosityConfig,
    pub rounds: usize,
    pub rollouts_per_round: usize,
    pub eval_episodes: usize,
    pub eval_every: usize,
    pub workers: usize,
    /// Stop once this many environment steps were collected (0 = no limit).
    pub max_env_steps: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for an environment and agent kind.
    pub fn defaults(env: EnvKind, agent: AgentKind) -> Self {
        let (gamma, rollouts, epochs, lr_value, eval_episodes) = match env {
            EnvKind::KeyDoor => (0.985, 50, 40, 0.01, 50),
            EnvKind::PointPush => (0.98, 32, 32, 3e-4, 32),
        };
        let base = PpoConfig {
            gamma,
            epochs,
            lr_policy: 1e-4,
            lr_value,
            ..PpoConfig::default()
        };
        let time_scale = if agent == AgentKind::Options { 8 } else { 4 };
        let curiosity = if agent.is_hierarchical() {
            CuriosityConfig::default()
        } else {
            CuriosityConfig::disabled()
        };
        Self {
            env: EnvConfig::new(env),
            agent,
            time_scales: vec![time_scale],
            widths: vec![3],
            ppo_worker: PpoConfig { max_kl: 0.002, ..base },
            ppo_master: PpoConfig { max_kl: 0.001, ..base },
            curiosity_worker: curiosity,
            curiosity_master: curiosity,
            rounds: 300,
            rollouts_per_round: rollouts,
            eval_episodes,
            eval_every: 5,
            workers: 1,
            max_env_steps: 0,
            seed: 0,
        }
    }

    /// Parse `key = value` lines. `[section]` headers prefix later keys with
    /// `section.`; `#` starts a comment. `env` and `agent` select the defaults
    /// the remaining keys are applied to.
    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let lookup = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let env: EnvKind = lookup("env").unwrap_or("keydoor").parse()?;
        let agent: AgentKind = lookup("agent").unwrap_or("mph").parse()?;
        let mut cfg = Self::defaults(env, agent);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<usize>> {
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        fn both(a: &mut PpoConfig, b: &mut PpoConfig, f: impl Fn(&mut PpoConfig)) {
            f(a);
            f(b);
        }
        let (pw, pm) = (&mut self.ppo_worker, &mut self.ppo_master);
        let (cw, cm) = (&mut self.curiosity_worker, &mut self.curiosity_master);
        match key {
            "env" => self.env.kind = value.parse()?,
            "agent" => self.agent = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "rounds" => self.rounds = num(key, value)?,
            "rollouts" => self.rollouts_per_round = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "max_env_steps" => self.max_env_steps = num(key, value)?,
            "hierarchy.time_scales" => self.time_scales = list(key, value)?,
            "hierarchy.widths" => self.widths = list(key, value)?,
            "keydoor.size" => self.env.keydoor.size = num(key, value)?,
            "keydoor.horizon" => self.env.keydoor.horizon = num(key, value)?,
            "pointpush.horizon" => self.env.pointpush.horizon = num(key, value)?,
            "pointpush.epsilon" => self.env.pointpush.goal_epsilon = num(key, value)?,
            "ppo.gamma" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.gamma = v)
            }
            "ppo.gae_lambda" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.gae_lambda = v)
            }
            "ppo.epochs" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.epochs = v)
            }
            "ppo.clip" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.clip = v)
            }
            "ppo.lr_policy" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.lr_policy = v)
            }
            "ppo.lr_value" => {
                let v = num(key, value)?;
                both(pw, pm, |c| c.lr_value = v)
            }
            "ppo.worker.max_kl" => pw.max_kl = num(key, value)?,
            "ppo.master.max_kl" => pm.max_kl = num(key, value)?,
            "curiosity.worker.enabled" => cw.enabled = num(key, value)?,
            "curiosity.master.enabled" => cm.enabled = num(key, value)?,
            "curiosity.worker.eta" => cw.eta = num(key, value)?,
            "curiosity.master.eta" => cm.eta = num(key, value)?,
            "curiosity.beta" => {
                let v = num(key, value)?;
                cw.beta = v;
                cm.beta = v;
            }
            "curiosity.lambda" => {
                let v = num(key, value)?;
                cw.lambda = v;
                cm.lambda = v;
            }
            "curiosity.lr" => {
                let v = num(key, value)?;
                cw.lr = v;
                cm.lr = v;
            }
            "curiosity.embed_dim" => {
                let v = num(key, value)?;
                cw.embed_dim = v;
                cm.embed_dim = v;
            }
            "curiosity.updates" => {
                let v = num(key, value)?;
                cw.updates_per_round = v;
                cm.updates_per_round = v;
            }
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Text form accepted by [`RunConfig::from_text`].
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let (pw, pm, cw, cm) = (&self.ppo_worker, &self.ppo_master, &self.curiosity_worker, &self.curiosity_master);
        let mut s = String::new();
        let _ = writeln!(s, "env = {}", self.env.kind.name());
        let _ = writeln!(s, "agent = {}", self.agent.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "rounds = {}", self.rounds);
        let _ = writeln!(s, "rollouts = {}", self.rollouts_per_round);
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "max_env_steps = {}", self.max_env_steps);
        let _ = writeln!(s, "\n[hierarchy]\ntime_scales = {}\nwidths = {}", join(&self.time_scales), join(&self.widths));
        let _ = writeln!(s, "\n[keydoor]\nsize = {}\nhorizon = {}", self.env.keydoor.size, self.env.keydoor.horizon);
        let _ = writeln!(
            s,
            "\n[pointpush]\nhorizon = {}\nepsilon = {}",
            self.env.pointpush.horizon, self.env.pointpush.goal_epsilon
        );
        let _ = writeln!(
            s,
            "\n[ppo]\ngamma = {}\ngae_lambda = {}\nepochs = {}\nclip = {}\nlr_policy = {}\nlr_value = {}\nworker.max_kl = {}\nmaster.max_kl = {}",
            pw.gamma, pw.gae_lambda, pw.epochs, pw.clip, pw.lr_policy, pw.lr_value, pw.max_kl, pm.max_kl
        );
        let _ = writeln!(
            s,
            "\n[curiosity]\nworker.enabled = {}\nmaster.enabled = {}\nworker.eta = {}\nmaster.eta = {}\nbeta = {}\nlambda = {}\nlr = {}\nembed_dim = {}\nupdates = {}",
            cw.enabled, cm.enabled, cw.eta, cm.eta, cw.beta, cw.lambda, cw.lr, cw.embed_dim, cw.updates_per_round
        );
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.rollouts_per_round == 0 {
            return Err(Error::Config("rollouts must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be at least 1".into()));
        }
        self.ppo_worker.validate()?;
        self.ppo_master.validate()?;
        self.curiosity_worker.validate()?;
        self.curiosity_master.validate()?;
        self.hierarchy()?;
        self.env.spec()?;
        Ok(())
    }

    pub fn hierarchy(&self) -> Result<HierarchySpec> {
        match self.agent {
            AgentKind::Flat => Ok(HierarchySpec::flat()),
            AgentKind::Mph => HierarchySpec::bits(&self.time_scales, &self.widths),
            kind => {
                if self.time_scales.len() != 1 || self.widths.len() != 1 {
                    return Err(Error::Config(format!("`{}` agents have exactly two levels", kind.name())));
                }
                let h = kind.default_hierarchy(self.time_scales[0], self.widths[0]);
                h.validate()?;
                Ok(h)
            }
        }
    }

    fn level_configs(&self, levels: usize) -> (Vec<PpoConfig>, Vec<CuriosityConfig>) {
        let ppo = (0..levels).map(|k| if k == 0 { self.ppo_worker } else { self.ppo_master }).collect();
        let cur = (0..levels)
            .map(|k| if k == 0 { self.curiosity_worker } else { self.curiosity_master })
            .collect();
        (ppo, cur)
    }

    pub fn build_agent(&self) -> Result<Agent> {
        let h = self.hierarchy()?;
        let (ppo, cur) = self.level_configs(h.num_levels());
        build_agent(self.agent, self.env.spec()?, &h, &ppo, &cur, derive_seed(self.seed, &[0]))
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", n + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let k = k.trim();
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub round: usize,
    pub env_steps: usize,
    /// Empty for the initial row.
    pub levels: Vec<LevelRoundStats>,
    pub eval: Option<EvalResult>,
}

const LEVEL_COLUMNS: [&str; 6] = ["kl", "policy_loss", "value_loss", "curiosity_loss", "intrinsic", "entropy"];

/// Header of `metrics.csv`: `round,env_steps`, then for each level `k`
/// (1 = worker) the columns `kl_lk, policy_loss_lk, value_loss_lk,
/// curiosity_loss_lk, intrinsic_lk, entropy_lk`, then `eval_success,eval_return`.
/// Fields that were not measured in a round are left empty.
pub fn metrics_header(levels: usize) -> String {
    let mut cols = vec!["round".to_string(), "env_steps".to_string()];
    for k in 1..=levels {
        cols.extend(LEVEL_COLUMNS.iter().map(|c| format!("{c}_l{k}")));
    }
    cols.push("eval_success".into());
    cols.push("eval_return".into());
    cols.join(",")
}

impl MetricsRow {
    pub fn to_csv(&self, levels: usize) -> String {
        let mut cols = vec![self.round.to_string(), self.env_steps.to_string()];
        for k in 0..levels {
            match self.levels.get(k) {
                Some(s) => cols.extend(
                    [s.mean_kl, s.policy_loss, s.value_loss, s.curiosity_loss, s.intrinsic_mean, s.entropy].map(|v| v.to_string()),
                ),
                None => cols.extend(std::iter::repeat_n(String::new(), LEVEL_COLUMNS.len())),
            }
        }
        match &self.eval {
            Some(e) => {
                cols.push(e.success_rate.to_string());
                cols.push(e.mean_return.to_string());
            }
            None => cols.extend([String::new(), String::new()]),
        }
        cols.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub success_rate: f64,
    pub mean_return: f64,
    pub episodes: usize,
}

/// Success rate and mean return over `episodes` episodes on a fixed stream
/// derived from `seed`. Policies are sampled, not run greedily.
pub fn eval_policy<P: HierarchyPolicy + ?Sized>(
    policy: &P,
    env: &EnvConfig,
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    let traces = collect_episodes(policy, env, &eval_seeds(seed, episodes), workers)?;
    let n = traces.len() as f64;
    Ok(EvalResult {
        success_rate: traces.iter().filter(|t| t.success).count() as f64 / n,
        mean_return: traces.iter().map(|t| t.env_return()).sum::<f64>() / n,
        episodes,
    })
}

/// Seeds of the evaluation episodes for a run seed.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<EpisodeSeed> {
    (0..episodes as u64)
        .map(|i| EpisodeSeed {
            reset: derive_seed(seed, &[TAG_EVAL_RESET, i]),
            actions: derive_seed(seed, &[TAG_EVAL_ACTIONS, i]),
        })
        .collect()
}

#[derive(Debug)]
pub struct TrainingOutcome {
    pub rows: Vec<MetricsRow>,
    pub agent: Agent,
}

impl TrainingOutcome {
    /// The last evaluated row.
    pub fn final_eval(&self) -> EvalResult {
        self.rows.iter().rev().find_map(|r| r.eval).expect("the initial row is always evaluated")
    }
}

/// Train an agent. With `out`, writes `metrics.csv`, `config.txt` and the
/// final `checkpoint.bin` there. If parameters become non-finite the run
/// stops, the last finite agent is saved as `last_good.bin`, and an error is
/// returned.
pub fn run_training(cfg: &RunConfig, out: Option<&Path>) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let mut agent = cfg.build_agent()?;
    let levels = agent.levels.len();
    let mut metrics = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
            let mut f = fs::File::create(dir.join(METRICS_FILE))?;
            writeln!(f, "{}", metrics_header(levels))?;
            Some(f)
        }
        None => None,
    };
    let mut rows = Vec::new();
    let mut emit = |row: MetricsRow, rows: &mut Vec<MetricsRow>| -> Result<()> {
        if let Some(f) = &mut metrics {
            writeln!(f, "{}", row.to_csv(levels))?;
        }
        rows.push(row);
        Ok(())
    };

    let first = eval_policy(&agent, &cfg.env, cfg.eval_episodes, cfg.seed, cfg.workers)?;
    emit(
        MetricsRow {
            eval: Some(first),
            ..MetricsRow::default()
        },
        &mut rows,
    )?;

    let mut env_steps = 0;
    for round in 1..=cfg.rounds {
        if cfg.max_env_steps > 0 && env_steps >= cfg.max_env_steps {
            break;
        }
        let seeds: Vec<EpisodeSeed> = (0..cfg.rollouts_per_round as u64)
            .map(|i| EpisodeSeed {
                reset: derive_seed(cfg.seed, &[TAG_TRAIN_RESET, round as u64, i]),
                actions: derive_seed(cfg.seed, &[TAG_TRAIN_ACTIONS, round as u64, i]),
            })
            .collect();
        let traces = collect_episodes(&agent, &cfg.env, &seeds, cfg.workers)?;
        env_steps += traces.iter().map(|t| t.len()).sum::<usize>();

        let last_good = agent.clone();
        let result = train_round(&mut agent, &traces).and_then(|s| {
            if agent.all_finite() {
                Ok(s)
            } else {
                Err(Error::NonFinite("agent parameters".into()))
            }
        });
        let stats = match result {
            Ok(s) => s,
            Err(Error::NonFinite(what)) => {
                let mut msg = format!("round {round}: non-finite {what}");
                if let Some(dir) = out {
                    last_good.to_archive()?.save(&dir.join(LAST_GOOD_FILE))?;
                    msg.push_str(&format!("; last good agent saved to {}", dir.join(LAST_GOOD_FILE).display()));
                }
                return Err(Error::NonFinite(msg));
            }
            Err(e) => return Err(e),
        };

        let last = round == cfg.rounds || (cfg.max_env_steps > 0 && env_steps >= cfg.max_env_steps);
        let eval = if last || round % cfg.eval_every == 0 {
            Some(eval_policy(&agent, &cfg.env, cfg.eval_episodes, cfg.seed, cfg.workers)?)
        } else {
            None
        };
        emit(
            MetricsRow {
                round,
                env_steps,
                levels: stats,
                eval,
            },
            &mut rows,
        )?;
    }
    if let Some(dir) = out {
        agent.to_archive()?.save(&dir.join(CHECKPOINT_FILE))?;
    }
    Ok(TrainingOutcome { rows, agent })
}

/// Frequencies of the master's held signal per environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub columns: Vec<String>,
    /// Episodes contributing to each step.
    pub counts: Vec<usize>,
    /// `[t][column]` number of episodes with the bit set or the skill chosen.
    pub tallies: Vec<Vec<usize>>,
    /// `[t][column]` frequency, `tallies / counts`.
    pub rows: Vec<Vec<f64>>,
    pub time_scale: usize,
}

impl Histogram {
    pub fn to_tsv(&self) -> String {
        let mut s = format!("t\t{}\tepisodes\n", self.columns.join("\t"));
        for (t, (row, n)) in self.rows.iter().zip(&self.counts).enumerate() {
            let vals: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{t}\t{}\t{n}", vals.join("\t"));
        }
        s
    }
}

/// Per-step frequencies of the top level's held signal over `episodes`
/// evaluation episodes. An episode that ends inside a hold window keeps its
/// last signal until the window closes, so every row averages over the same
/// episodes within a window.
pub fn export_modulation_histogram<P: HierarchyPolicy + ?Sized>(
    policy: &P,
    env: &EnvConfig,
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<Histogram> {
    let spec = policy.hierarchy();
    let top = spec.num_levels() - 1;
    let signal = spec.levels[top]
        .signal
        .ok_or_else(|| Error::UnsupportedAgent("a flat agent has no modulation signal".into()))?;
    if episodes == 0 {
        return Err(Error::Usage("histogram needs at least one episode".into()));
    }
    let (columns, width): (Vec<String>, usize) = match signal {
        SignalKind::Bits(m) => ((0..m).map(|j| format!("bit{j}")).collect(), m),
        SignalKind::OneHot(k) | SignalKind::Select(k) => ((0..k).map(|j| format!("skill{j}")).collect(), k),
    };
    let time_scale = spec.levels[top].time_scale;
    let horizon = env.spec()?.horizon;
    let traces = collect_episodes(policy, env, &eval_seeds(derive_seed(seed, &[1]), episodes), workers)?;
    let mut tallies: Vec<Vec<usize>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for tr in &traces {
        let len = tr.len();
        let padded = (len.div_ceil(time_scale) * time_scale).min(horizon).max(len);
        for t in 0..padded {
            if tallies.len() <= t {
                tallies.push(vec![0; width]);
                counts.push(0);
            }
            let held = tr.steps[t.min(len - 1)].held[top]
                .as_ref()
                .ok_or_else(|| Error::Precondition("missing held signal".into()))?;
            let hot = match held {
                Action::Bits(_) => held.features(0),
                other => other.features(width),
            };
            for (c, v) in tallies[t].iter_mut().zip(hot) {
                *c += usize::from(v > 0.5);
            }
            counts[t] += 1;
        }
    }
    let rows = tallies
        .iter()
        .zip(&counts)
        .map(|(row, &n)| row.iter().map(|&v| v as f64 / n as f64).collect())
        .collect();
    Ok(Histogram {
        columns,
        counts,
        tallies,
        rows,
        time_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationArm {
    Both,
    WorkerOnly,
    MasterOnly,
    None,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [AblationArm::Both, AblationArm::WorkerOnly, AblationArm::MasterOnly, AblationArm::None];

    pub fn name(self) -> &'static str {
        match self {
            AblationArm::Both => "both",
            AblationArm::WorkerOnly => "worker_only",
            AblationArm::MasterOnly => "master_only",
            AblationArm::None => "none",
        }
    }

    /// `(worker, master)` curiosity flags.
    pub fn flags(self) -> (bool, bool) {
        match self {
            AblationArm::Both => (true, true),
            AblationArm::WorkerOnly => (true, false),
            AblationArm::MasterOnly => (false, true),
            AblationArm::None => (false, false),
        }
    }

    pub fn apply(self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        (c.curiosity_worker.enabled, c.curiosity_master.enabled) = self.flags();
        c
    }
}

/// Mean, population standard deviation and mean of the best `k` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub mean: f64,
    pub std: f64,
    pub top_k_mean: f64,
}

pub fn summarize(values: &[f64], top_k: usize) -> SeedSummary {
    if values.is_empty() {
        return SeedSummary {
            mean: f64::NAN,
            std: f64::NAN,
            top_k_mean: f64::NAN,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = top_k.clamp(1, sorted.len());
    SeedSummary {
        mean,
        std,
        top_k_mean: sorted[..k].iter().sum::<f64>() / k as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: AblationArm,
    pub seeds: Vec<u64>,
    pub initial: Vec<EvalResult>,
    pub final_eval: Vec<EvalResult>,
    /// Mean intrinsic reward per level over all rounds, per seed.
    pub intrinsic: Vec<Vec<f64>>,
    pub success: SeedSummary,
}

/// Train every arm on every seed. Arms differ only in which levels receive
/// intrinsic reward. Results are ordered by mean final success, best first.
pub fn run_ablation(cfg: &RunConfig, seeds: &[u64], arms: &[AblationArm], out: Option<&Path>) -> Result<Vec<ArmResult>> {
    if !cfg.agent.is_hierarchical() {
        return Err(Error::UnsupportedAgent("ablation needs a hierarchical agent".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Usage("ablation needs at least one seed".into()));
    }
    let mut results = Vec::new();
    for &arm in arms {
        let mut r = ArmResult {
            arm,
            seeds: seeds.to_vec(),
            initial: Vec::new(),
            final_eval: Vec::new(),
            intrinsic: Vec::new(),
            success: summarize(&[], 1),
        };
        for &seed in seeds {
            let mut c = arm.apply(cfg);
            c.seed = seed;
            let dir = out.map(|d| d.join(arm.name()).join(format!("seed{seed}")));
            let o = run_training(&c, dir.as_deref())?;
            r.initial.push(o.rows[0].eval.expect("initial row is evaluated"));
            r.final_eval.push(o.final_eval());
            let trained = &o.rows[1..];
            r.intrinsic.push(
                (0..o.agent.levels.len())
                    .map(|k| trained.iter().map(|row| row.levels[k].intrinsic_mean).sum::<f64>() / trained.len().max(1) as f64)
                    .collect(),
            );
        }
        let finals: Vec<f64> = r.final_eval.iter().map(|e| e.success_rate).collect();
        r.success = summarize(&finals, 5);
        results.push(r);
    }
    results.sort_by(|a, b| b.success.mean.total_cmp(&a.success.mean));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut s = String::from("arm,mean_success,std_success,top5_success,mean_return\n");
        for r in &results {
            let ret = r.final_eval.iter().map(|e| e.mean_return).sum::<f64>() / r.final_eval.len() as f64;
            let _ = writeln!(s, "{},{},{},{},{}", r.arm.name(), r.success.mean, r.success.std, r.success.top_k_mean, ret);
        }
        fs::write(dir.join(ABLATION_FILE), s)?;
    }
    Ok(results)
}

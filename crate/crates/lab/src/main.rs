use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mph_core::bounds::{run_campaign, CampaignConfig};
use mph_core::checkpoint::Archive;
use mph_core::trainer::{
    eval_policy, export_modulation_histogram, run_ablation, run_training, AblationArm, RunConfig, CHECKPOINT_FILE,
    CONFIG_FILE, HISTOGRAM_FILE, METRICS_FILE,
};

#[derive(Parser)]
#[command(name = "mph-lab", version, about = "Train and inspect modulated policy hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write metrics.csv, config.txt and checkpoint.bin.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained checkpoint.
    Eval {
        #[command(flatten)]
        saved: SavedArgs,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Write the master's per-step decision frequencies to histogram.tsv.
    Histogram {
        #[command(flatten)]
        saved: SavedArgs,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
    },
    /// Train the four intrinsic-reward arms over several seeds.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized check of the kernel-drift bound on tabular hierarchies.
    Bounds {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Largest number of levels per instance (2 or 3).
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// KL budget per level, worker first; one value applies to all
        /// levels. Random budgets are drawn when omitted.
        #[arg(long, num_args = 1..)]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        max_states: usize,
        #[arg(long, default_value_t = 4)]
        max_actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// flat, options, onehot or mph.
    #[arg(long)]
    agent: Option<String>,
    /// keydoor or pointpush.
    #[arg(long)]
    env: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut extra = Vec::new();
        if let Some(v) = &self.env {
            extra.push(format!("env = {v}"));
        }
        if let Some(v) = &self.agent {
            extra.push(format!("agent = {v}"));
        }
        if let Some(v) = self.seed {
            extra.push(format!("seed = {v}"));
        }
        for o in &self.overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("override `{o}` is not KEY=VALUE");
            };
            extra.push(format!("{} = {}", k.trim(), v.trim()));
        }
        Ok(RunConfig::from_text(&with_overrides(&text, &extra))?)
    }
}

/// Append top-level lines after a file that may end inside a section.
fn with_overrides(text: &str, extra: &[String]) -> String {
    let mut out = String::new();
    let mut section = String::new();
    for line in text.lines() {
        let t = line.split('#').next().unwrap_or("").trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        if t.is_empty() {
            continue;
        }
        match t.split_once('=') {
            Some((k, v)) if !section.is_empty() => out.push_str(&format!("{section}.{} = {}\n", k.trim(), v.trim())),
            _ => out.push_str(&format!("{t}\n")),
        }
    }
    for e in extra {
        out.push_str(e);
        out.push('\n');
    }
    out
}

#[derive(Args)]
struct SavedArgs {
    /// Directory written by `train`.
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<out>/config.txt`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to `<out>/checkpoint.bin`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Evaluation seed; defaults to the run seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl SavedArgs {
    fn load(&self) -> Result<(RunConfig, mph_core::agent::Agent)> {
        let cfg_path = self.config.clone().unwrap_or_else(|| self.out.join(CONFIG_FILE));
        let text = fs::read_to_string(&cfg_path).with_context(|| format!("reading {}", cfg_path.display()))?;
        let mut cfg = RunConfig::from_text(&text)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        let ckpt = self.checkpoint.clone().unwrap_or_else(|| self.out.join(CHECKPOINT_FILE));
        let mut agent = cfg.build_agent()?;
        agent
            .load_archive(&Archive::load(&ckpt).with_context(|| format!("loading {}", ckpt.display()))?)
            .with_context(|| format!("checkpoint {} does not match the configuration", ckpt.display()))?;
        Ok((cfg, agent))
    }
}

fn train(run: &RunArgs, out: &Path) -> Result<()> {
    let cfg = run.load()?;
    let o = run_training(&cfg, Some(out))?;
    let e = o.final_eval();
    println!(
        "{} on {}: {} rounds, final success {:.3}, mean return {:.3}; metrics in {}",
        cfg.agent.name(),
        cfg.env.kind.name(),
        o.rows.len() - 1,
        e.success_rate,
        e.mean_return,
        out.join(METRICS_FILE).display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { run, out } => train(run, out)?,
        Command::Eval { saved, episodes } => {
            let (cfg, agent) = saved.load()?;
            let e = eval_policy(&agent, &cfg.env, episodes.unwrap_or(cfg.eval_episodes), cfg.seed, cfg.workers)?;
            println!("success_rate {}\nmean_return {}\nepisodes {}", e.success_rate, e.mean_return, e.episodes);
        }
        Command::Histogram { saved, episodes } => {
            let (cfg, agent) = saved.load()?;
            let h = export_modulation_histogram(&agent, &cfg.env, *episodes, cfg.seed, cfg.workers)?;
            let path = saved.out.join(HISTOGRAM_FILE);
            fs::write(&path, h.to_tsv())?;
            println!("wrote {} ({} steps)", path.display(), h.rows.len());
        }
        Command::Ablate { run, seeds, out } => {
            let cfg = run.load()?;
            let results = run_ablation(&cfg, seeds, &AblationArm::ALL, Some(out))?;
            for r in &results {
                println!(
                    "{:<12} success {:.3} ± {:.3}",
                    r.arm.name(),
                    r.success.mean,
                    r.success.std
                );
            }
        }
        Command::Bounds {
            instances,
            levels,
            delta,
            max_states,
            max_actions,
            seed,
            out,
        } => {
            let cfg = CampaignConfig {
                instances: *instances,
                max_states: *max_states,
                max_actions: *max_actions,
                max_levels: *levels,
                deltas: (!delta.is_empty()).then(|| delta.clone()),
                seed: *seed,
                ..CampaignConfig::default()
            };
            let report = run_campaign(&cfg)?;
            fs::create_dir_all(out)?;
            let path = out.join("bounds_report.json");
            fs::write(&path, report.to_json()?)?;
            println!(
                "{} instances, {} violations, max drift/bound per level {:?}; report in {}",
                report.instances.len(),
                report.violations,
                report.max_ratio,
                path.display()
            );
            if report.violations > 0 {
                bail!("drift bound violated in {} instances", report.violations);
            }
        }
    }
    Ok(())
}

//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mph_core::agent::AgentKind;
use mph_core::bounds::{drift_bounds, run_campaign, CampaignConfig};
use mph_core::curiosity::{CuriosityAdam, CuriosityConfig, CuriosityModels, TransitionBatch};
use mph_core::distributions::{Action, BernoulliVector, Categorical, DiagGaussian, Distribution};
use mph_core::envs::{EnvConfig, EnvKind};
use mph_core::hierarchy::{slice_rollouts, HierarchySpec};
use mph_core::nn::{Layer, MlpParams};
use mph_core::policy::{HeadKind, PolicyNet};
use mph_core::ppo::{surrogate_loss_and_grad, value_loss_and_grad, AdvantageBatch, KL_HARD_FACTOR};
use mph_core::rollout::{collect_episodes, EpisodeSeed};
use mph_core::tensor::Tensor;
use mph_core::trainer::{export_modulation_histogram, run_training, MetricsRow, RunConfig, METRICS_FILE};
use mph_core::{derive_seed, Error};

fn report(n: usize, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {status} ({detail})");
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst relative error between an analytic and a central-difference
/// derivative, with an absolute floor of 1e-8.
fn fd_error(analytic: f64, f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5;
    let numeric = (f(x + h) - f(x - h)) / (2.0 * h);
    let diff = (analytic - numeric).abs();
    if diff <= 1e-8 {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

/// Check `probes` random coordinates of `params` against finite differences.
fn check_mlp(
    params: &MlpParams,
    grads: &MlpParams,
    probes: usize,
    rng: &mut ChaCha8Rng,
    loss: &dyn Fn(&MlpParams) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let i = rng.random_range(0..params.num_params());
        let x = params.get_flat(i);
        let mut p = params.clone();
        let mut f = |v: f64| {
            p.set_flat(i, v);
            loss(&p)
        };
        worst = worst.max(fd_error(grads.get_flat(i), &mut f, x));
    }
    worst
}

fn surrogate_instance(head: HeadKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = rng.random_range(2..6);
    let mut policy = PolicyNet::new(obs_dim, head, seed).unwrap();
    for v in &mut policy.log_std {
        *v = rng.random_range(-1.0..0.5);
    }
    let n = 6;
    let obs = random_tensor(&mut rng, n, obs_dim);
    let dists = policy.distributions(&obs).unwrap();
    let actions: Vec<Action> = dists.iter().map(|d| d.sample(&mut rng)).collect();
    // Old log-probs close to the current ones keep every ratio inside the clip range.
    let old_log_probs = dists
        .iter()
        .zip(&actions)
        .map(|(d, a)| d.log_prob(a).unwrap() + rng.random_range(-0.05..0.05))
        .collect();
    let batch = AdvantageBatch {
        observations: obs,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: vec![0.0; n],
    };
    let (_, grads) = surrogate_loss_and_grad(&policy, &batch, 0.2).unwrap();
    let loss_net = |p: &MlpParams| {
        let mut q = policy.clone();
        q.net = p.clone();
        surrogate_loss_and_grad(&q, &batch, 0.2).unwrap().0
    };
    let mut worst = check_mlp(&policy.net, &grads.net, 12, &mut rng, &loss_net);
    for j in 0..policy.log_std.len() {
        let mut q = policy.clone();
        let mut f = |v: f64| {
            q.log_std[j] = v;
            surrogate_loss_and_grad(&q, &batch, 0.2).unwrap().0
        };
        worst = worst.max(fd_error(grads.log_std[j], &mut f, policy.log_std[j]));
    }
    worst
}

fn value_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = rng.random_range(2..8);
    let value = MlpParams::standard(obs_dim, 1, seed).unwrap();
    let obs = random_tensor(&mut rng, 5, obs_dim);
    let returns: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, g) = value_loss_and_grad(&value, &obs, &returns).unwrap();
    check_mlp(&value, &g, 12, &mut rng, &|p| value_loss_and_grad(p, &obs, &returns).unwrap().0)
}

fn curiosity_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = rng.random_range(2..6);
    let ad = rng.random_range(1..4);
    let models = CuriosityModels::new(sd, ad, 8, seed).unwrap();
    let batch = TransitionBatch {
        states: random_tensor(&mut rng, 4, sd),
        actions: random_tensor(&mut rng, 4, ad),
        next_states: random_tensor(&mut rng, 4, sd),
    };
    let cfg = CuriosityConfig {
        lambda: 1e-2,
        ..CuriosityConfig::default()
    };
    let (_, g) = models.loss_and_grads(&batch, &cfg).unwrap();
    let total = |m: &CuriosityModels| m.loss(&batch, &cfg).unwrap().total;
    let e = check_mlp(&models.embed, &g.embed, 8, &mut rng, &|p| {
        let mut m = models.clone();
        m.embed = p.clone();
        total(&m)
    });
    let f = check_mlp(&models.forward, &g.forward, 8, &mut rng, &|p| {
        let mut m = models.clone();
        m.forward = p.clone();
        total(&m)
    });
    let r = check_mlp(&models.reverse, &g.reverse, 8, &mut rng, &|p| {
        let mut m = models.clone();
        m.reverse = p.clone();
        total(&m)
    });
    e.max(f).max(r)
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let instances = 100;
    let mut worst = [0.0f64; 5];
    for i in 0..instances {
        worst[0] = worst[0].max(surrogate_instance(HeadKind::Bernoulli(3), 1000 + i));
        worst[1] = worst[1].max(surrogate_instance(HeadKind::Categorical(4), 2000 + i));
        worst[2] = worst[2].max(surrogate_instance(HeadKind::Gaussian(2), 3000 + i));
        worst[3] = worst[3].max(value_instance(4000 + i));
        worst[4] = worst[4].max(curiosity_instance(5000 + i));
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|w| *w <= 1e-6) && elapsed < Duration::from_secs(60);
    report(
        1,
        pass,
        &format!(
            "{instances} instances per network; worst relative error (0 when within 1e-8 absolute) bernoulli {:.1e}, categorical {:.1e}, gaussian {:.1e}, value {:.1e}, curiosity {:.1e}; {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            worst[4],
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn random_pair(rng: &mut ChaCha8Rng, kind: usize) -> (Distribution, Distribution) {
    let mut logits = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-4.0..4.0)).collect() };
    match kind {
        0 => {
            let m = 1 + (logits(1)[0].abs() as usize % 4);
            (
                Distribution::Bernoulli(BernoulliVector::from_logits(&logits(m))),
                Distribution::Bernoulli(BernoulliVector::from_logits(&logits(m))),
            )
        }
        _ => {
            let k = 2 + (logits(1)[0].abs() as usize % 4);
            (
                Distribution::Categorical(Categorical::from_logits(&logits(k)).unwrap()),
                Distribution::Categorical(Categorical::from_logits(&logits(k)).unwrap()),
            )
        }
    }
}

fn support(d: &Distribution) -> Vec<Action> {
    match d {
        Distribution::Bernoulli(b) => (0..1usize << b.width())
            .map(|mask| Action::Bits((0..b.width()).map(|j| ((mask >> j) & 1) as u8).collect()))
            .collect(),
        Distribution::Categorical(c) => (0..c.num_choices()).map(Action::Index).collect(),
        Distribution::Gaussian(_) => unreachable!(),
    }
}

#[test]
fn criterion_02_distribution_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs = 10_000;
    let (mut norm_err, mut ent_err, mut min_kl, mut pinsker_violations): (f64, f64, f64, usize) = (0.0, 0.0, f64::INFINITY, 0);
    for i in 0..pairs {
        let (p, q) = random_pair(&mut rng, i % 2);
        let mut total = 0.0;
        let mut ent = 0.0;
        for a in support(&p) {
            let lp = p.log_prob(&a).unwrap();
            total += lp.exp();
            ent -= lp.exp() * lp;
        }
        norm_err = norm_err.max((total - 1.0).abs());
        ent_err = ent_err.max((ent - p.entropy()).abs());
        let kl = p.kl(&q).unwrap();
        min_kl = min_kl.min(kl);
        if p.total_variation(&q).unwrap() > (kl / 2.0).sqrt() + 1e-12 {
            pinsker_violations += 1;
        }
    }
    // One-dimensional Gaussians: density integrates to one, entropy closed form.
    let mut gauss_err: f64 = 0.0;
    for _ in 0..200 {
        let mean = rng.random_range(-1.0..1.0);
        let log_std = rng.random_range(-1.5..1.0);
        let d = Distribution::Gaussian(DiagGaussian::new(&[mean], &[log_std]).unwrap());
        let sd = f64::exp(log_std);
        let (lo, hi, n) = (mean - 12.0 * sd, mean + 12.0 * sd, 20_000);
        let w = (hi - lo) / n as f64;
        let (mut mass, mut ent) = (0.0, 0.0);
        for j in 0..n {
            let x = lo + (j as f64 + 0.5) * w;
            let lp = d.log_prob(&Action::Real(vec![x])).unwrap();
            mass += lp.exp() * w;
            ent -= lp.exp() * lp * w;
        }
        gauss_err = gauss_err.max((mass - 1.0).abs()).max((ent - d.entropy()).abs());
        let other = Distribution::Gaussian(DiagGaussian::new(&[mean + 0.3], &[log_std - 0.2]).unwrap());
        min_kl = min_kl.min(d.kl(&other).unwrap());
    }
    let pass = norm_err <= 1e-12 && ent_err <= 1e-10 && gauss_err <= 1e-3 && min_kl >= 0.0 && pinsker_violations == 0;
    report(
        2,
        pass,
        &format!(
            "{pairs} discrete pairs: normalization error {norm_err:.1e}, entropy error {ent_err:.1e}, min KL {min_kl:.1e}, Pinsker violations {pinsker_violations}; gaussian error {gauss_err:.1e}"
        ),
    );
    assert!(pass);
}

/// Budget-matched KeyDoor configuration used by the learning comparisons.
fn keydoor_config(agent: AgentKind, seed: u64) -> RunConfig {
    let mut c = RunConfig::defaults(EnvKind::KeyDoor, agent);
    c.seed = seed;
    c.rollouts_per_round = LEARNING_ROLLOUTS;
    c.rounds = usize::MAX / 2;
    c.max_env_steps = LEARNING_BUDGET;
    c.eval_every = usize::MAX / 2;
    c.eval_episodes = 100;
    c
}

const LEARNING_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LEARNING_BUDGET: usize = 300_000;
const LEARNING_ROLLOUTS: usize = 10;

struct LearningRuns {
    mph: Vec<Vec<MetricsRow>>,
    flat: Vec<Vec<MetricsRow>>,
    no_im: Vec<Vec<MetricsRow>>,
}

fn final_success(rows: &[MetricsRow]) -> f64 {
    rows.iter().rev().find_map(|r| r.eval).unwrap().success_rate
}

fn env_steps(rows: &[MetricsRow]) -> usize {
    rows.last().unwrap().env_steps
}

fn learning_runs() -> &'static LearningRuns {
    static RUNS: OnceLock<LearningRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let run = |cfg: RunConfig| run_training(&cfg, None).unwrap().rows;
        let mut out = LearningRuns {
            mph: Vec::new(),
            flat: Vec::new(),
            no_im: Vec::new(),
        };
        for &s in &LEARNING_SEEDS {
            out.mph.push(run(keydoor_config(AgentKind::Mph, s)));
            out.flat.push(run(keydoor_config(AgentKind::Flat, s)));
            let mut none = keydoor_config(AgentKind::Mph, s);
            none.curiosity_worker.enabled = false;
            none.curiosity_master.enabled = false;
            out.no_im.push(run(none));
        }
        out
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_03_ppo_kl_contract() {
    let mut rows_checked = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut check = |cfg: &RunConfig, rows: &[MetricsRow]| {
        for r in rows {
            for (k, l) in r.levels.iter().enumerate() {
                let delta = if k == 0 { cfg.ppo_worker.max_kl } else { cfg.ppo_master.max_kl };
                worst_ratio = worst_ratio.max(l.mean_kl / delta);
                rows_checked += 1;
            }
        }
    };
    // Every agent kind on both environments.
    for env in [EnvKind::KeyDoor, EnvKind::PointPush] {
        for kind in AgentKind::ALL {
            let mut c = RunConfig::defaults(env, kind);
            c.rounds = 6;
            c.rollouts_per_round = 4;
            c.eval_every = 100;
            c.eval_episodes = 2;
            let o = run_training(&c, None).unwrap();
            check(&c, &o.rows);
        }
    }
    // The long comparison runs.
    let runs = learning_runs();
    let cfg = keydoor_config(AgentKind::Mph, 0);
    for rows in runs.mph.iter().chain(&runs.flat).chain(&runs.no_im) {
        check(&cfg, rows);
    }
    let pass = worst_ratio <= KL_HARD_FACTOR && rows_checked > 0;
    report(
        3,
        pass,
        &format!("{rows_checked} level-rounds checked; largest mean KL / δ = {worst_ratio:.3} (limit {KL_HARD_FACTOR})"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_bound_campaign() {
    let start = Instant::now();
    let mut violations = 0;
    let mut instances = 0;
    let mut worst: Vec<f64> = Vec::new();
    for deltas in [None, Some(vec![0.001]), Some(vec![0.002, 0.001])] {
        let cfg = CampaignConfig {
            instances: 1000,
            max_states: 6,
            max_actions: 4,
            max_levels: 3,
            deltas,
            seed: 4,
            ..CampaignConfig::default()
        };
        let r = run_campaign(&cfg).unwrap();
        violations += r.violations;
        instances += r.instances.len();
        worst.push(r.max_ratio.iter().copied().fold(0.0, f64::max));
    }
    let two_level = drift_bounds(&[0.001, 0.001])[0];
    let elapsed = start.elapsed();
    let pass = violations == 0 && (two_level - 0.0223607).abs() < 5e-8 && elapsed < Duration::from_secs(600);
    report(
        4,
        pass,
        &format!(
            "{instances} instances, {violations} violations, largest drift/bound {:.3}, two-level bound {two_level:.7}, {:.1}s",
            worst.iter().copied().fold(0.0, f64::max),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_time_scale_semantics() {
    let mut episodes = 0;
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    while episodes < 1000 {
        let env = if episodes % 4 == 0 { EnvKind::KeyDoor } else { EnvKind::PointPush };
        let t2 = rng.random_range(2..=16);
        let mut c = RunConfig::defaults(env, AgentKind::Mph);
        c.time_scales = vec![t2];
        c.seed = rng.random();
        let agent = c.build_agent().unwrap();
        let seeds: Vec<EpisodeSeed> = (0..20).map(|_| EpisodeSeed { reset: rng.random(), actions: rng.random() }).collect();
        let traces = collect_episodes(&agent, &c.env, &seeds, 1).unwrap();
        for tr in &traces {
            episodes += 1;
            for (t, step) in tr.steps.iter().enumerate() {
                let active = step.decisions[1].is_some();
                if active != (t % t2 == 0) {
                    failures.push(format!("activation at t={t}, T={t2}"));
                }
                if !active && step.held[1] != tr.steps[t - 1].held[1] {
                    failures.push(format!("held signal changed at t={t}, T={t2}"));
                }
                if step.decisions[0].as_ref().unwrap().obs.len() != 13 {
                    failures.push("worker observation width".into());
                }
            }
            let sliced = slice_rollouts(&agent.hierarchy, tr).unwrap();
            if sliced[1].records.len() != tr.len().div_ceil(t2) || sliced[0].records.len() != tr.len() {
                failures.push(format!("record counts for length {} and T={t2}", tr.len()));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        5,
        pass,
        &format!("{episodes} episodes, {} failures{}", failures.len(), failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()),
    );
    assert!(pass);
}

#[test]
fn criterion_06_curiosity_behavior() {
    // Deterministic tabular dataset: 12 states, 3 actions, fixed successor table.
    let (states, actions) = (12usize, 3usize);
    let code = |s: usize| -> Vec<f64> { (0..4).map(|b| if (s >> b) & 1 == 1 { 0.8 } else { -0.8 }).collect() };
    let mut s_rows = Vec::new();
    let mut a_rows = Vec::new();
    let mut n_rows = Vec::new();
    for s in 0..states {
        for a in 0..actions {
            s_rows.push(code(s));
            a_rows.push(Action::Index(a).features(actions));
            n_rows.push(code((s * 5 + a * 7 + 1) % states));
        }
    }
    let batch = TransitionBatch {
        states: Tensor::from_rows(&s_rows).unwrap(),
        actions: Tensor::from_rows(&a_rows).unwrap(),
        next_states: Tensor::from_rows(&n_rows).unwrap(),
    };
    let cfg = CuriosityConfig::default();
    let mut models = CuriosityModels::new(4, actions, cfg.embed_dim, 6).unwrap();
    let mut opt = CuriosityAdam::new(&models, cfg.lr);
    let initial = models.loss(&batch, &cfg).unwrap().forward_error;
    models.update(&batch, &mut opt, &cfg, 500).unwrap();
    let trained = models.loss(&batch, &cfg).unwrap().forward_error;
    let reduction = 1.0 - trained / initial;

    // Perfect models: forward net copies the current embedding, next state equals state.
    let d = 4;
    let mut perfect = CuriosityModels::new(d, 1, d, 1).unwrap();
    let mut w = Tensor::zeros(&[d + 1, d]);
    for i in 0..d {
        w.data_mut()[i * d + i] = 1.0;
    }
    perfect.forward = MlpParams::from_layers(vec![Layer {
        weight: w,
        bias: Tensor::zeros(&[d]),
    }])
    .unwrap();
    let s = [0.3, -0.2, 0.9, 0.1];
    let zero = perfect.intrinsic_reward(&s, &[1.0], &s, 0.1).unwrap();

    let pass = reduction >= 0.5 && zero == 0.0;
    report(
        6,
        pass,
        &format!("forward error {initial:.4} -> {trained:.4} after 500 updates ({:.0}% reduction); perfect-model bonus {zero}", reduction * 100.0),
    );
    assert!(pass);
}

#[test]
fn criterion_07_mph_beats_flat() {
    let start = Instant::now();
    let runs = learning_runs();
    let mph: Vec<f64> = runs.mph.iter().map(|r| final_success(r)).collect();
    let flat: Vec<f64> = runs.flat.iter().map(|r| final_success(r)).collect();
    let steps_ok = runs
        .mph
        .iter()
        .chain(&runs.flat)
        .all(|r| env_steps(r) >= LEARNING_BUDGET && env_steps(r) < LEARNING_BUDGET + LEARNING_ROLLOUTS * 200);
    let gap = mean(&mph) - mean(&flat);
    let pass = gap >= 0.15 && steps_ok;
    report(
        7,
        pass,
        &format!(
            "KeyDoor, {} seeds, {LEARNING_BUDGET} steps: MPH {:.3} {mph:?} vs flat {:.3} {flat:?}, gap {:.1} points; {:.0}s",
            LEARNING_SEEDS.len(),
            mean(&mph),
            mean(&flat),
            gap * 100.0,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_intrinsic_motivation_ablation() {
    let runs = learning_runs();
    let both: Vec<f64> = runs.mph.iter().map(|r| final_success(r)).collect();
    let none: Vec<f64> = runs.no_im.iter().map(|r| final_success(r)).collect();
    let zero_intrinsic = runs.no_im.iter().flatten().all(|r| r.levels.iter().all(|l| l.intrinsic_mean == 0.0));
    let gap = mean(&both) - mean(&none);
    let pass = gap >= 0.10 && zero_intrinsic;
    report(
        8,
        pass,
        &format!(
            "KeyDoor, {} seeds: both {:.3} {both:?} vs none {:.3} {none:?}, gap {:.1} points",
            LEARNING_SEEDS.len(),
            mean(&both),
            mean(&none),
            gap * 100.0
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_modulation_histogram() {
    let mut problems = Vec::new();
    for kind in [AgentKind::Mph, AgentKind::Options, AgentKind::OneHot] {
        let mut c = RunConfig::defaults(EnvKind::KeyDoor, kind);
        c.rounds = 3;
        c.rollouts_per_round = 4;
        c.eval_episodes = 4;
        c.seed = 9;
        let o = run_training(&c, None).unwrap();
        let h = export_modulation_histogram(&o.agent, &c.env, 40, 9, 1).unwrap();
        let t = h.time_scale;
        for (i, row) in h.rows.iter().enumerate() {
            if i % t != 0 && (row != &h.rows[i - 1] || h.counts[i] != h.counts[i - 1]) {
                problems.push(format!("{}: row {i} differs inside its window", kind.name()));
            }
            if kind != AgentKind::Mph {
                if h.tallies[i].iter().sum::<usize>() != h.counts[i] {
                    problems.push(format!("{}: row {i} tallies do not cover every episode", kind.name()));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    problems.push(format!("{}: row {i} frequencies do not sum to one", kind.name()));
                }
            }
        }
        let tsv = h.to_tsv();
        if tsv.lines().count() != h.rows.len() + 1 {
            problems.push(format!("{}: table has the wrong number of lines", kind.name()));
        }
    }
    let flat = RunConfig::defaults(EnvKind::KeyDoor, AgentKind::Flat).build_agent().unwrap();
    let flat_rejected = matches!(
        export_modulation_histogram(&flat, &EnvConfig::new(EnvKind::KeyDoor), 2, 0, 1),
        Err(Error::UnsupportedAgent(_))
    );
    let pass = problems.is_empty() && flat_rejected;
    report(
        9,
        pass,
        &format!("mph, options and onehot tables; {} problems; flat rejected: {flat_rejected}", problems.len()),
    );
    assert!(pass, "{problems:?}");
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, workers) in [(0, 2), (1, 2), (2, 1), (3, 3)] {
        let mut c = RunConfig::defaults(EnvKind::PointPush, AgentKind::Mph);
        c.rounds = 6;
        c.rollouts_per_round = 6;
        c.eval_every = 2;
        c.eval_episodes = 6;
        c.workers = workers;
        c.seed = derive_seed(10, &[]);
        let out = dir.path().join(format!("run{i}"));
        run_training(&c, Some(&out)).unwrap();
        files.push(std::fs::read(out.join(METRICS_FILE)).unwrap());
    }
    let identical = files.windows(2).all(|w| w[0] == w[1]);
    let mut other = RunConfig::defaults(EnvKind::PointPush, AgentKind::Mph);
    other.rounds = 6;
    other.rollouts_per_round = 6;
    other.eval_every = 2;
    other.eval_episodes = 6;
    other.seed = derive_seed(11, &[]);
    let out = dir.path().join("other");
    run_training(&other, Some(&out)).unwrap();
    let differs = std::fs::read(out.join(METRICS_FILE)).unwrap() != files[0];
    let pass = identical && differs;
    report(
        10,
        pass,
        &format!("4 runs (workers 2, 2, 1, 3) byte-identical: {identical}; different seed differs: {differs}"),
    );
    assert!(pass);
}

#[test]
fn hierarchy_spec_used_by_learning_runs() {
    let c = keydoor_config(AgentKind::Mph, 0);
    assert_eq!(c.hierarchy().unwrap(), HierarchySpec::bits(&[4], &[3]).unwrap());
    assert_eq!(keydoor_config(AgentKind::Flat, 0).hierarchy().unwrap(), HierarchySpec::flat());
}

//! Subcommand bodies, callable from tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dqn_core::agent::{
    evaluate, q_probe, run_training, select_action, Agent, AllocMode, EvalControl, EvalReport, TrainingSummary,
};
use dqn_core::checkpoint::Checkpoint;
use dqn_core::env::{read_trajectory, write_trajectory, EnvKind, Environment, TrajectoryEntry};
use dqn_core::neural::{QNetwork, Topology, Workspace};
use dqn_core::proto::{self, Endpoint, SessionEnd};
use dqn_core::wrappers::{scale_pixels, WrapperConfig, WrappedEnv};
use dqn_core::{derive_seed, seeded_rng, Scalar};

use crate::config::{Precision, RunConfig};
use crate::schema;

pub type DynEnv = Box<dyn Environment + Send>;

/// Seed streams beyond the agent's own (which uses 1-4).
const EVAL_STREAM: u64 = 2_000;
const PROBE_STREAM: u64 = 3_000;

/// The training environment: in-process, or a client of a running server.
pub fn make_env(cfg: &RunConfig) -> Result<DynEnv> {
    Ok(match &cfg.remote {
        None => cfg.env.make(),
        Some(Endpoint::Unix(p)) => Box::new(proto::connect_unix(p).with_context(|| format!("connecting to unix:{}", p.display()))?),
        Some(Endpoint::Fifo(d)) => Box::new(proto::connect_fifo(d).with_context(|| format!("connecting to fifo:{}", d.display()))?),
    })
}

/// Evaluation always plays whole games locally.
pub fn eval_wrapper(cfg: &RunConfig) -> WrapperConfig {
    WrapperConfig { life_loss_terminal: false, ..cfg.wrapper }
}

pub fn topology_for(cfg: &RunConfig, env: &dyn Environment) -> Result<Topology> {
    let spec = env.spec();
    Ok(Topology::named(&cfg.topology, cfg.wrapper.history_len, spec.frame_height, spec.frame_width, spec.num_actions())?)
}

fn load_network<F: Scalar>(cfg: &RunConfig, checkpoint: &Path) -> Result<QNetwork<F>> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let want = topology_for(cfg, cfg.env.make().as_ref())?;
    if ckpt.topology != want {
        bail!("checkpoint topology `{}` does not match the configured `{want}`", ckpt.topology);
    }
    Ok(ckpt.to_network()?)
}

pub fn write_resolved(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join("config.txt");
    fs::write(&path, cfg.to_text())?;
    Ok(path)
}

pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainingSummary> {
    match cfg.precision {
        Precision::F32 => train_as::<f32>(cfg, resume),
        Precision::F64 => train_as::<f64>(cfg, resume),
    }
}

fn train_as<F: Scalar>(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainingSummary> {
    train_observed::<F>(cfg, resume, &mut |_, _| EvalControl::Continue)
}

/// [`train`] at a fixed precision, with a hook called after every evaluation.
pub fn train_observed<F: Scalar>(
    cfg: &RunConfig,
    resume: Option<&Path>,
    on_eval: &mut dyn FnMut(&EvalReport, &QNetwork<F>) -> EvalControl,
) -> Result<TrainingSummary> {
    write_resolved(cfg)?;
    let env = make_env(cfg)?;
    let topology = topology_for(cfg, env.as_ref())?;
    let mut agent = Agent::<F, DynEnv>::new(env, cfg.wrapper, topology, cfg.agent.clone())?;
    if let Some(path) = resume {
        let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
        agent.restore(&ckpt)?;
        log::info!("resumed from {} at step {}", path.display(), ckpt.step);
    }
    let mut eval_env = WrappedEnv::new(cfg.env.make(), eval_wrapper(cfg), derive_seed(cfg.agent.seed, 5))?;
    run_training(&mut agent, &mut eval_env, Some(&cfg.out_dir), on_eval).map_err(Into::into)
}

pub struct EvalOptions {
    pub episodes: Option<usize>,
    pub epsilon: Option<f64>,
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    match cfg.precision {
        Precision::F32 => eval_as::<f32>(cfg, checkpoint, opts),
        Precision::F64 => eval_as::<f64>(cfg, checkpoint, opts),
    }
}

fn eval_as<F: Scalar>(cfg: &RunConfig, checkpoint: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let net = load_network::<F>(cfg, checkpoint)?;
    let seed = derive_seed(cfg.agent.seed, EVAL_STREAM);
    let mut env = WrappedEnv::new(cfg.env.make(), eval_wrapper(cfg), seed)?;
    let mut report = evaluate(
        &net,
        &mut env,
        opts.episodes.unwrap_or(cfg.agent.schedule.eval_episodes),
        opts.epsilon.unwrap_or(cfg.agent.schedule.eval_epsilon),
        cfg.agent.max_episode_steps,
        seed,
        0,
    )?;
    report.checkpoint = checkpoint.file_name().map(|n| n.to_string_lossy().into_owned());
    Ok(report)
}

pub fn format_report(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "checkpoint {}", r.checkpoint.as_deref().unwrap_or("-"));
    let _ = writeln!(out, "episodes {}  epsilon {}", r.scores.len(), r.epsilon);
    let _ = writeln!(out, "mean {:.3} ± {:.3} (sigma)  95% CI [{:.3}, {:.3}]", r.mean, r.sigma, r.mean - r.ci95, r.mean + r.ci95);
    let _ = writeln!(out, "{:.0} frames/s", r.fps);
    out
}

/// Per-episode scores in the `eval_scores` schema.
pub fn scores_csv(r: &EvalReport) -> String {
    let mut out = schema::EVAL_SCORES.header();
    out.push('\n');
    for (i, (score, noops)) in r.scores.iter().zip(&r.noops).enumerate() {
        let _ = writeln!(out, "{i},{noops},{score}");
    }
    out
}

/// Plays one game (up to `max_steps` agent steps) and records it; greedy
/// with `epsilon` exploration under `checkpoint`, uniformly random without.
pub fn record(cfg: &RunConfig, checkpoint: Option<&Path>, max_steps: u64, epsilon: f64) -> Result<String> {
    let net: Option<QNetwork<f64>> = checkpoint.map(|c| load_network(cfg, c)).transpose()?;
    let seed = derive_seed(cfg.agent.seed, PROBE_STREAM);
    let mut env = WrappedEnv::new(cfg.env.make(), eval_wrapper(cfg), seed)?;
    let mut rng = seeded_rng(derive_seed(seed, 1));
    let mut input = vec![0.0; cfg.wrapper.history_len * env.env().spec().frame_len()];
    let mut entries = Vec::new();
    env.begin_episode()?;
    for _ in 0..max_steps {
        let action = match &net {
            Some(net) => {
                scale_pixels(env.stack().as_bytes(), &mut input);
                select_action(net, &mut Workspace::new(net, 1), &input, epsilon, &mut rng)?
            }
            None => rand::Rng::random_range(&mut rng, 0..env.num_actions()),
        };
        let s = env.step(action)?;
        entries.push(TrajectoryEntry { action, reward: s.reward, terminal: s.game_over, lives: s.lives });
        if s.game_over {
            break;
        }
    }
    Ok(format!("# dqn trajectory: env {} seed {}\n{}", cfg.env.name(), cfg.agent.seed, write_trajectory(&entries)))
}

/// Replays a recorded trajectory and dumps every visited state's action
/// values in the `probe` schema.
pub fn probe(cfg: &RunConfig, checkpoint: &Path, trajectory: &str) -> Result<String> {
    let entries = read_trajectory(trajectory)?;
    let net = load_network::<f64>(cfg, checkpoint)?;
    let seed = derive_seed(cfg.agent.seed, PROBE_STREAM);
    let mut env = WrappedEnv::new(cfg.env.make(), eval_wrapper(cfg), seed)?;
    let names = env.env().spec().action_names.clone();
    let mut input = vec![0.0; net.input_len()];
    let mut out = schema::PROBE.header();
    out.push('\n');
    env.begin_episode()?;
    for (step, e) in entries.iter().enumerate() {
        scale_pixels(env.stack().as_bytes(), &mut input);
        let p = q_probe(&net, &input, &names)?;
        for (a, (name, q)) in names.iter().zip(&p.values).enumerate() {
            let _ = writeln!(out, "{step},{name},{q},{}", u8::from(a == p.argmax));
        }
        let s = env.step(e.action)?;
        if s.reward != e.reward || s.game_over != e.terminal || s.lives != e.lives {
            bail!("trajectory diverged at step {step}: recorded for a different config or seed");
        }
        if s.game_over {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub frames: u64,
    pub seconds: f64,
    pub fps: f64,
}

impl Throughput {
    fn new(frames: u64, seconds: f64) -> Self {
        Self { frames, seconds, fps: frames as f64 / seconds.max(1e-9) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub train_preallocated: Throughput,
    pub train_naive: Throughput,
    pub eval: Throughput,
    pub rounds: usize,
}

impl BenchReport {
    /// Preallocated over naive training throughput.
    pub fn alloc_ratio(&self) -> f64 {
        self.train_preallocated.fps / self.train_naive.fps
    }

    pub fn to_text(&self) -> String {
        format!(
            "train_fps_preallocated {:.1}\ntrain_fps_naive {:.1}\nalloc_ratio {:.3}\neval_fps {:.1}\nrounds {}\n",
            self.train_preallocated.fps,
            self.train_naive.fps,
            self.alloc_ratio(),
            self.eval.fps,
            self.rounds
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = schema::BENCH.header();
        out.push('\n');
        for (mode, t) in [("train_preallocated", self.train_preallocated), ("train_naive", self.train_naive), ("eval", self.eval)] {
            let _ = writeln!(out, "{mode},{},{},{}", t.frames, t.seconds, t.fps);
        }
        out
    }
}

/// Best-of-`rounds` throughput of training with each allocation path
/// (alternating which goes first) and of greedy evaluation, over `steps`
/// agent steps each once learning is under way.
pub fn bench(cfg: &RunConfig, steps: u64, rounds: usize) -> Result<BenchReport> {
    match cfg.precision {
        Precision::F32 => bench_as::<f32>(cfg, steps, rounds),
        Precision::F64 => bench_as::<f64>(cfg, steps, rounds),
    }
}

fn bench_as<F: Scalar>(cfg: &RunConfig, steps: u64, rounds: usize) -> Result<BenchReport> {
    let best = |a: Option<Throughput>, b: Throughput| match a {
        Some(a) if a.fps >= b.fps => a,
        _ => b,
    };
    let mut pre: Option<Throughput> = None;
    let mut naive: Option<Throughput> = None;
    let mut eval: Option<Throughput> = None;
    for round in 0..rounds.max(1) {
        let order = if round % 2 == 0 { [AllocMode::Preallocated, AllocMode::Naive] } else { [AllocMode::Naive, AllocMode::Preallocated] };
        for mode in order {
            let (train, agent) = bench_train::<F>(cfg, mode, steps)?;
            match mode {
                AllocMode::Preallocated => {
                    pre = Some(best(pre, train));
                    eval = Some(best(eval, bench_eval(cfg, agent.online(), steps)?));
                }
                AllocMode::Naive => naive = Some(best(naive, train)),
            }
        }
    }
    Ok(BenchReport {
        train_preallocated: pre.expect("at least one round"),
        train_naive: naive.expect("at least one round"),
        eval: eval.expect("at least one round"),
        rounds: rounds.max(1),
    })
}

fn bench_train<F: Scalar>(cfg: &RunConfig, alloc: AllocMode, steps: u64) -> Result<(Throughput, Agent<F, DynEnv>)> {
    let mut agent_cfg = cfg.agent.clone();
    agent_cfg.alloc = alloc;
    // only the steady state is timed; a short warmup suffices
    agent_cfg.schedule.warmup_steps = agent_cfg.schedule.warmup_steps.min(1_000).max(agent_cfg.schedule.batch_size as u64);
    agent_cfg.schedule.total_steps = u64::MAX;
    let env = cfg.env.make();
    let topology = topology_for(cfg, env.as_ref())?;
    let mut agent = Agent::<F, DynEnv>::new(env, cfg.wrapper, topology, agent_cfg.clone())?;
    while agent.steps() < agent_cfg.schedule.warmup_steps + agent_cfg.schedule.update_frequency {
        agent.step()?;
    }
    let frames0 = agent.env().frames_consumed();
    let t = Instant::now();
    for _ in 0..steps {
        agent.step()?;
    }
    Ok((Throughput::new(agent.env().frames_consumed() - frames0, t.elapsed().as_secs_f64()), agent))
}

fn bench_eval<F: Scalar>(cfg: &RunConfig, net: &QNetwork<F>, steps: u64) -> Result<Throughput> {
    let mut env = WrappedEnv::new(cfg.env.make(), eval_wrapper(cfg), derive_seed(cfg.agent.seed, EVAL_STREAM))?;
    let mut ws = Workspace::new(net, 1);
    let mut input = vec![F::zero(); net.input_len()];
    let mut rng = seeded_rng(cfg.agent.seed);
    let eps = cfg.agent.schedule.eval_epsilon;
    let frames0 = env.frames_consumed();
    let t = Instant::now();
    env.begin_episode()?;
    let mut in_game = 0;
    for _ in 0..steps {
        scale_pixels(env.stack().as_bytes(), &mut input);
        let a = select_action(net, &mut ws, &input, eps, &mut rng)?;
        let s = env.step(a)?;
        in_game += 1;
        let max = cfg.agent.max_episode_steps;
        if s.game_over || (max > 0 && in_game >= max) {
            if !s.game_over {
                env.end_game();
            }
            env.begin_episode()?;
            in_game = 0;
        }
    }
    Ok(Throughput::new(env.frames_consumed() - frames0, t.elapsed().as_secs_f64()))
}

/// Serves `sessions` protocol sessions (forever when `None`) for `env`.
pub fn serve(env: EnvKind, endpoint: &Endpoint, seed: u64, sessions: Option<u64>) -> Result<Vec<SessionEnd>> {
    if let Endpoint::Fifo(dir) = endpoint {
        let (to_env, _) = proto::fifo_paths(dir);
        if !to_env.exists() {
            proto::make_fifo_pair(dir)?;
        }
    }
    let mut env = env.make();
    Ok(proto::serve(env.as_mut(), endpoint, seed, sessions)?)
}

/// Reads a checkpoint's header (for `dqn info`-style printing in `eval`).
pub fn checkpoint_summary(path: &Path) -> Result<String> {
    let c = Checkpoint::load(path)?;
    Ok(format!("step {} topology {} stored as {}", c.step, c.topology, c.scalar))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

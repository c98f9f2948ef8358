//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs everything by default. `DQN_ACCEPTANCE=1,4,7` restricts the run to
//! the listed criteria (5 and 6 together take hours on one core).

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::io::BufReader;
use std::os::unix::net::UnixStream;
use std::path::Path;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use dqn_cli::commands::{self, EvalOptions};
use dqn_cli::config::{RawConfig, RunConfig};
use dqn_core::agent::{
    checkpoint_name, gridworld_policy_check, random_policy_scores, Agent, AgentConfig, BestTracker, EpsilonSchedule,
    EvalControl, TrainSchedule,
};
use dqn_core::checkpoint::Checkpoint;
use dqn_core::env::{BreakoutConfig, EnvStep, Environment, MiniBreakout, OneHotMdpEnv};
use dqn_core::mdp::gridworld::gridworld_mdp;
use dqn_core::mdp::{q_learning_update, run_tabular_q_learning, value_iteration, QTable, SolverConfig, StartRule, TabularSchedule};
use dqn_core::neural::gradcheck::{analytic_gradient, min_relu_margin, numeric_gradient, relative_error};
use dqn_core::neural::{InitScheme, QNetwork, Topology};
use dqn_core::optim::{ClipMode, Optimizer, OptimizerConfig, Variant};
use dqn_core::proto::{decode_action_msg, decode_frame_msg, decode_hello, read_line_bounded, serve_session, RemoteEnv};
use dqn_core::replay::{Minibatch, NaiveReplay, ReplayMemory};
use dqn_core::wrappers::{WrapperConfig, WrappedEnv};
use dqn_core::{seeded_rng, Rng};
use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Counting;

thread_local! {
    static ALLOCS: Cell<u64> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        unsafe { System.realloc(ptr, layout, new_size) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn allocations_during(f: impl FnOnce()) -> u64 {
    let before = ALLOCS.with(Cell::get);
    f();
    ALLOCS.with(Cell::get) - before
}

/// Outcome of one criterion: a verdict plus the numbers behind it.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn chi_square_p(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    let expected = n / counts.len() as f64;
    let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn config(sets: &[String]) -> RunConfig {
    let mut raw = RawConfig::default();
    raw.apply_overrides(sets).unwrap();
    raw.resolve().unwrap()
}

// ---------------------------------------------------------------- 1

const GRAD_TOPOLOGIES: &[&str] = &[
    "in=2x7x7;conv3k3s2",
    "in=1x1x6;dense4",
    "in=1x1x6;dense4nb",
    "in=1x1x5;dense5;relu",
    "in=2x6x6;conv3k2s1;relu;dense3",
    "in=1x1x6;dense4;relu;dense2",
    "in=2x8x8;conv2k3s1;relu;conv3k2s2",
];

fn gradient_error(topology: &Topology, batch: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    for attempt in 0..500u64 {
        let mut net = QNetwork::<f64>::with_init(topology.clone(), InitScheme::FanInUniform, seed ^ (attempt << 32)).unwrap();
        for p in net.params_mut() {
            if *p == 0.0 {
                *p = rng.random_range(-0.1..0.1);
            }
        }
        let input: Vec<f64> = (0..batch * net.input_len()).map(|_| rng.random_range(0.0..1.0)).collect();
        if min_relu_margin(&net, &input, batch).unwrap() < 1e-3 {
            continue;
        }
        let out_grad: Vec<f64> = (0..batch * net.num_actions()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = analytic_gradient(&net, &input, batch, &out_grad).unwrap();
        let n = numeric_gradient(&mut net, &input, batch, &out_grad, 1e-5).unwrap();
        return a.iter().zip(&n).map(|(&a, &n)| relative_error(a, n, 1e-6)).fold(0.0, f64::max);
    }
    f64::INFINITY
}

fn gradient_correctness() -> Verdict {
    let t = Instant::now();
    let per = 15;
    let mut worst = 0.0f64;
    let mut instances = 0;
    for (i, desc) in GRAD_TOPOLOGIES.iter().enumerate() {
        let topo = Topology::parse(desc).unwrap();
        for k in 0..per {
            worst = worst.max(gradient_error(&topo, 1 + k % 3, (i * 1000 + k) as u64));
            instances += 1;
        }
    }
    worst = worst.max(gradient_error(&Topology::toy(2, 12, 12, 3), 2, 11));
    instances += 1;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && instances >= 100 && secs < 60.0,
        format!("{instances} instances over {} topologies, worst relative error {worst:.2e}, {secs:.1}s", GRAD_TOPOLOGIES.len() + 1),
    )
}

// ---------------------------------------------------------------- 2

fn bellman_oracle() -> Verdict {
    let t = Instant::now();
    let mdp = gridworld_mdp::<f64>().unwrap();
    let q_star = value_iteration(&mdp, &SolverConfig::new(0.9, 1e-12, 10_000).unwrap()).unwrap();
    let sched = TabularSchedule {
        discount: 0.9,
        epsilon_start: 1.0,
        epsilon_end: 0.02,
        epsilon_decay_episodes: 20_000,
        alpha_scale: 1.0,
        alpha_exponent: 0.6,
        max_steps_per_episode: 100,
        start: StartRule::UniformNonTerminal,
    };
    let errors: Vec<f64> = (0..5).map(|seed| run_tabular_q_learning(&mdp, 20_000, &sched, seed).unwrap().q.max_abs_diff(&q_star)).collect();
    let secs = t.elapsed().as_secs_f64();
    let ok = errors.iter().filter(|&&e| e < 1e-3).count();
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.1e}")).collect();
    verdict(ok == 5 && secs < 30.0, format!("{ok}/5 seeds within 1e-3 (errors {}), {secs:.1}s", shown.join(" ")))
}

// ---------------------------------------------------------------- 3

fn linear_equivalence() -> Verdict {
    let (lr, gamma, steps) = (0.1, 0.9, 10_000);
    let env = OneHotMdpEnv::new(gridworld_mdp::<f64>().unwrap(), 0, 0).unwrap();
    let net = QNetwork::<f64>::with_init(Topology::linear(25, 5), InitScheme::FanInUniform, 9).unwrap();
    let cfg = AgentConfig {
        schedule: TrainSchedule {
            total_steps: steps,
            warmup_steps: 0,
            update_frequency: 1,
            target_sync: 1,
            eval_interval: steps,
            eval_episodes: 1,
            eval_epsilon: 0.0,
            batch_size: 1,
        },
        epsilon: EpsilonSchedule { start: 1.0, end: 0.1, anneal_steps: 5_000 },
        discount: gamma,
        replay_capacity: 1,
        optimizer: OptimizerConfig::sgd(lr),
        clip: ClipMode::None,
        max_episode_steps: 50,
        seed: 11,
        ..AgentConfig::default()
    };
    let mut table = QTable::<f64>::zeros(25, 5);
    for (i, &w) in net.params().iter().enumerate() {
        table.set(i / 5, i % 5, w);
    }
    let plain = WrapperConfig { action_repeat: 1, history_len: 1, noop_max: 0, ..WrapperConfig::default() };
    let mut agent = Agent::with_network(env, plain, net, cfg).unwrap();
    let mut state = 0;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let info = agent.step().unwrap();
        let next = agent.env().env().state();
        q_learning_update(&mut table, state, info.action, info.reward, next, info.terminal, lr, gamma).unwrap();
        let dev = agent.online().params().iter().zip(table.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        state = if info.terminal || info.truncated { 0 } else { next };
    }
    verdict(worst <= 1e-10, format!("{steps} steps, worst per-step deviation {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

fn optimizer_oracles() -> Verdict {
    // scalar re-derivations, one step from w = 1, g = 2, zeroed state
    let (w, g, lr, decay, eta, eps) = (1.0f64, 2.0f64, 0.1, 0.95, 0.95, 0.01);
    let ms = (1.0 - decay) * g * g;
    let hinton = w - lr * g / (ms + eps).sqrt();
    let mom = (1.0 - eta) * g;
    let deepmind = w - lr * g / ((ms - mom * mom).max(0.0) + eps).sqrt();

    let mut errs = Vec::new();
    for (variant, expected) in [(Variant::RmspropHinton, hinton), (Variant::RmspropDeepmind, deepmind)] {
        let cfg = OptimizerConfig { learning_rate: lr, ..OptimizerConfig::for_variant(variant) };
        let mut opt = Optimizer::<f64>::new(cfg, 1).unwrap();
        let mut p = [w];
        opt.step(&mut p, &[g]).unwrap();
        errs.push((p[0] - expected).abs());
    }

    let mut rng = seeded_rng(4);
    let mut finite = true;
    let n = 1_000_000;
    for variant in [Variant::RmspropHinton, Variant::RmspropDeepmind] {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::for_variant(variant), 4).unwrap();
        let mut p = [0.0; 4];
        let mut grad = [0.0; 4];
        for t in 0..n / 2 {
            for (i, g) in grad.iter_mut().enumerate() {
                let mag = match rng.random_range(0..5) {
                    0 => 0.0,
                    1 => 1e150,
                    2 => 1e-300,
                    3 => rng.random_range(-1e6..1e6),
                    _ => 10f64.powi(rng.random_range(-12..12)),
                };
                *g = if (t + i) % 2 == 0 { mag } else { -mag };
            }
            opt.step(&mut p, &grad).unwrap();
            finite &= p.iter().all(|x| x.is_finite());
        }
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    verdict(
        worst <= 1e-12 && finite,
        format!("worked examples off by {worst:.1e}; {n} fuzzed steps, parameters {}", if finite { "all finite" } else { "NON-FINITE" }),
    )
}

// ---------------------------------------------------------------- 5 and 6

/// Steps over which the early-training score is averaged.
const EARLY_STEPS: u64 = 100_000;

struct BreakoutRuns {
    baseline: f64,
    /// Per seed: (best eval mean, step it was reached, early mean).
    life_loss: Vec<(f64, u64, f64)>,
    no_life_loss: Vec<f64>,
}

fn early_mean(rows: &[(u64, f64)]) -> f64 {
    let early: Vec<f64> = rows.iter().filter(|(s, _)| *s <= EARLY_STEPS).map(|&(_, m)| m).collect();
    early.iter().sum::<f64>() / early.len().max(1) as f64
}

fn breakout_runs(out: &Path) -> BreakoutRuns {
    let base_cfg = config(&["env=minibreakout".into()]);
    let mut env = WrappedEnv::new(MiniBreakout::new(BreakoutConfig::default()), commands::eval_wrapper(&base_cfg), 99).unwrap();
    let random = random_policy_scores(&mut env, 200, base_cfg.agent.max_episode_steps, 99).unwrap();
    let baseline = random.iter().sum::<f64>() / random.len() as f64;
    let goal = 3.0 * baseline;

    let mut life_loss = Vec::new();
    let mut no_life_loss = Vec::new();
    for seed in 0..5u64 {
        let cfg = config(&["env=minibreakout".into(), format!("seed={seed}"), format!("out_dir={}", out.join(format!("ll{seed}")).display())]);
        let t = Instant::now();
        let mut rows = Vec::new();
        let summary = commands::train_observed::<f32>(&cfg, None, &mut |r, _| {
            rows.push((r.step, r.mean));
            if r.mean >= goal && r.step >= EARLY_STEPS {
                EvalControl::Stop
            } else {
                EvalControl::Continue
            }
        })
        .unwrap();
        let (step, best) = summary.best.unwrap_or((0, 0.0));
        eprintln!("  breakout seed {seed}: best {best:.2} at step {step} ({:.0}s)", t.elapsed().as_secs_f64());
        life_loss.push((best, step, early_mean(&rows)));

        let cfg = cfg
            .with("life_loss_terminal", "false")
            .unwrap()
            .with("total_steps", &EARLY_STEPS.to_string())
            .unwrap()
            .with("out_dir", &out.join(format!("nll{seed}")).display().to_string())
            .unwrap();
        let mut rows = Vec::new();
        commands::train_observed::<f32>(&cfg, None, &mut |r, _| {
            rows.push((r.step, r.mean));
            EvalControl::Continue
        })
        .unwrap();
        no_life_loss.push(early_mean(&rows));
    }
    BreakoutRuns { baseline, life_loss, no_life_loss }
}

fn end_to_end(breakout: Option<&BreakoutRuns>) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let mut solved = Vec::new();
    for seed in 0..5u64 {
        let cfg = config(&["env=gridworld".into(), format!("seed={seed}"), format!("out_dir={}", dir.path().join(format!("g{seed}")).display())]);
        let history = cfg.wrapper.history_len;
        let discount = cfg.agent.discount;
        let mut at = None;
        commands::train_observed::<f32>(&cfg, None, &mut |r, net| {
            if gridworld_policy_check(net, history, discount).unwrap().is_optimal() {
                at = Some(r.step);
                EvalControl::Stop
            } else {
                EvalControl::Continue
            }
        })
        .unwrap();
        solved.push(at.filter(|&s| s <= 50_000));
    }
    let secs = t.elapsed().as_secs_f64();
    let grid_ok = solved.iter().flatten().count();
    let grid_pass = grid_ok >= 4 && secs < 600.0;
    let mut detail = format!("gridworld {grid_ok}/5 optimal (steps {solved:?}) in {secs:.0}s");
    let Some(b) = breakout else {
        return verdict(false, format!("{detail}; minibreakout not run"));
    };
    let goal = 3.0 * b.baseline;
    let hits = b.life_loss.iter().filter(|r| r.0 >= goal).count();
    let best: Vec<String> = b.life_loss.iter().map(|r| format!("{:.2}@{}", r.0, r.1)).collect();
    detail += &format!("; minibreakout {hits}/5 reach {goal:.2} (3x random {:.2}), best {}", b.baseline, best.join(" "));
    verdict(grid_pass && hits >= 3, detail)
}

fn life_loss_effect(b: Option<&BreakoutRuns>) -> Verdict {
    let Some(b) = b else {
        return verdict(false, "minibreakout not run");
    };
    let pairs: Vec<(f64, f64)> = b.life_loss.iter().map(|r| r.2).zip(b.no_life_loss.iter().cloned()).collect();
    let wins = pairs.iter().filter(|(ll, nll)| ll > nll).count();
    let shown: Vec<String> = pairs.iter().map(|(a, b)| format!("{a:.2}/{b:.2}")).collect();
    verdict(wins >= 4, format!("life-loss ahead in {wins}/5 seeds over the first {EARLY_STEPS} steps (ll/no-ll: {})", shown.join(" ")))
}

// ---------------------------------------------------------------- 7

fn replay_properties() -> Verdict {
    let (m, fl, cap) = (4, 16, 97);
    let mut rng = seeded_rng(7);
    let mut ring = ReplayMemory::new(cap, m, fl).unwrap();
    let mut naive = NaiveReplay::new(cap, m, fl).unwrap();
    let mut stack: Vec<u8> = Vec::new();
    let mut equal = true;
    let mut ops = 0;
    while ops < 10_000 {
        if stack.is_empty() {
            let f: Vec<u8> = (0..fl).map(|_| rng.random_range(0..4)).collect();
            stack = f.repeat(m);
        }
        let mut next = stack[fl..].to_vec();
        next.extend((0..fl).map(|_| rng.random_range(0..4u8)));
        let (a, r, terminal) = (rng.random_range(0..4), rng.random_range(-1.0..1.0), rng.random_bool(0.05));
        ring.insert(&stack, a, r, &next, terminal).unwrap();
        naive.insert(&stack, a, r, &next, terminal).unwrap();
        ops += 1;
        stack = if terminal { Vec::new() } else { next };
        if rng.random_bool(0.5) && ring.len() >= 8 {
            let seed = rng.random();
            equal &= ring.sample::<f32>(8, &mut seeded_rng(seed)).unwrap() == naive.sample::<f32>(8, &mut seeded_rng(seed)).unwrap();
            ops += 1;
        }
        equal &= ring.len() == naive.len() && (0..ring.len()).all(|i| &ring.get(i).unwrap() == naive.get(i).unwrap());
    }

    let mut mem = ReplayMemory::new(10, 1, 1).unwrap();
    for k in 0..10u8 {
        mem.insert(&[k], k as usize, 0.0, &[k], true).unwrap();
    }
    let mut batch = Minibatch::<f64>::new(10, 1, 1);
    let mut counts = [0f64; 10];
    for _ in 0..10_000 {
        mem.sample_into(&mut batch, &mut rng).unwrap();
        for &a in &batch.actions {
            counts[a] += 1.0;
        }
    }
    let p = chi_square_p(&counts);

    let allocs = steady_state_allocations(&mut rng);
    verdict(
        equal && p > 0.01 && allocs == 0,
        format!("{ops} operations {} the naive model; sampling chi-square p = {p:.3}; {allocs} allocations over 10^4 post-fill operations", if equal { "match" } else { "DIVERGE from" }),
    )
}

fn steady_state_allocations(rng: &mut Rng) -> u64 {
    let (m, fl, cap) = (4, 64, 500);
    let frames: Vec<Vec<u8>> = (0..64).map(|_| (0..fl).map(|_| rng.random()).collect()).collect();
    let mut stack = vec![0u8; m * fl];
    let mut next = vec![0u8; m * fl];
    let mut mem = ReplayMemory::new(cap, m, fl).unwrap();
    let mut batch = Minibatch::<f32>::new(32, m, fl);
    let mut t = 0usize;
    let mut op = |mem: &mut ReplayMemory, rng: &mut Rng, batch: &mut Minibatch<f32>| {
        next.copy_within(fl.., 0);
        next[(m - 1) * fl..].copy_from_slice(&frames[t % frames.len()]);
        mem.insert(&stack, t % 4, 1.0, &next, t % 37 == 36).unwrap();
        stack.copy_from_slice(&next);
        t += 1;
        if mem.len() >= 32 {
            mem.sample_into(batch, rng).unwrap();
        }
    };
    while mem.len() < cap {
        op(&mut mem, rng, &mut batch);
    }
    allocations_during(|| {
        for _ in 0..10_000 {
            op(&mut mem, rng, &mut batch);
        }
    })
}

// ---------------------------------------------------------------- 8

fn play<E: Environment>(env: &mut E, game: u64) -> Vec<EnvStep> {
    let mut rng = seeded_rng(1_000 + game);
    let mut out = vec![env.reset(game).unwrap()];
    while !out.last().unwrap().terminal {
        let a = rng.random_range(0..env.spec().num_actions());
        out.push(env.step(a).unwrap());
    }
    out
}

fn protocol_transparency() -> Verdict {
    let (a, b) = UnixStream::pair().unwrap();
    let server = thread::spawn(move || {
        let mut env = MiniBreakout::new(BreakoutConfig::default());
        let mut reader = BufReader::new(a.try_clone().unwrap());
        let mut writer = a;
        serve_session(&mut env, &mut reader, &mut writer, 0)
    });
    let mut remote = RemoteEnv::connect(BufReader::new(b.try_clone().unwrap()), b).unwrap();
    let identical = (0..100).filter(|&g| play(&mut remote, g) == play(&mut MiniBreakout::new(BreakoutConfig::default()), g)).count();
    drop(remote);
    let _ = server.join();

    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut rng = seeded_rng(77);
        let mut out = EnvStep { frame: Vec::new(), reward: 0.0, terminal: false, lives: 0 };
        let alphabet = b"0123456789abcdefABCDEF:,-.+eE RESETOKnaif\x00\xff\n";
        for i in 0..100_000 {
            let len = rng.random_range(0..120);
            let line: Vec<u8> =
                (0..len).map(|_| if i % 2 == 0 { alphabet[rng.random_range(0..alphabet.len())] } else { rng.random() }).collect();
            let _ = decode_frame_msg(&line, 4, &mut out);
            let _ = decode_action_msg(&line, 4);
            let _ = decode_hello(&line);
            let mut cursor: &[u8] = &line;
            let mut buf = Vec::new();
            while let Ok(true) = read_line_bounded(&mut cursor, 40, &mut buf) {}
        }
        let _ = tx.send(());
    });
    let fuzz_ok = rx.recv_timeout(Duration::from_secs(60)).is_ok();
    verdict(
        identical == 100 && fuzz_ok,
        format!("{identical}/100 remote games byte-identical; 10^5 fuzzed lines {}", if fuzz_ok { "decoded without crash or hang" } else { "CRASHED or hung" }),
    )
}

// ---------------------------------------------------------------- 9

fn throughput_ordering(out: &Path) -> Verdict {
    let cfg = config(&["env=minibreakout".into(), format!("out_dir={}", out.display())]);
    let report = commands::bench(&cfg, 5_000, 3).unwrap();
    std::fs::create_dir_all(out).unwrap();
    std::fs::write(out.join("bench.txt"), report.to_text()).unwrap();
    std::fs::write(out.join("bench.csv"), report.to_csv()).unwrap();
    let (pre, naive, eval) = (report.train_preallocated.fps, report.train_naive.fps, report.eval.fps);
    verdict(
        pre > naive && eval >= pre,
        format!("preallocated {pre:.0} fps vs naive {naive:.0} fps (ratio {:.3}); eval {eval:.0} fps", report.alloc_ratio()),
    )
}

// ---------------------------------------------------------------- 10

fn evaluation_fidelity(out: &Path) -> Verdict {
    std::fs::create_dir_all(out).unwrap();
    // cmd_eval on a checkpoint of an untrained network
    let cfg = config(&["env=minibreakout".into(), format!("out_dir={}", out.display())]);
    let net = QNetwork::<f32>::with_init(Topology::toy(4, 32, 32, 4), InitScheme::FanInUniform, 1).unwrap();
    let path = out.join("untrained.qnet");
    Checkpoint::capture(&net, None, 0).save(&path).unwrap();
    let report = commands::eval(&cfg, &path, &EvalOptions { episodes: None, epsilon: None }).unwrap();
    let eval_ok = report.scores.len() == 30 && report.epsilon == 0.05 && report.noops.iter().all(|&k| k <= 30);

    // no-op starts over 10^4 games with the evaluation wrapper
    let mut env = WrappedEnv::new(MiniBreakout::new(BreakoutConfig::default()), commands::eval_wrapper(&cfg), 42).unwrap();
    let mut counts = [0f64; 31];
    for _ in 0..10_000 {
        env.begin_episode().unwrap();
        counts[env.last_noops()] += 1.0;
        env.end_game();
    }
    let p = chi_square_p(&counts);

    // best-checkpoint rule against an argmax oracle on synthetic sequences
    let mut rng = seeded_rng(10);
    let mut synthetic_ok = true;
    for _ in 0..1_000 {
        let means: Vec<f64> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0..6) as f64).collect();
        let mut tracker = BestTracker::new();
        for (i, &m) in means.iter().enumerate() {
            tracker.offer(i as u64, m);
        }
        let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = means.iter().position(|&m| m == top).unwrap() as u64;
        synthetic_ok &= tracker.best() == Some((first, top));
    }
    // and through a real training run
    let run_cfg = config(&[
        "env=gridworld".into(),
        "total_steps=10000".into(),
        "eval_interval=1000".into(),
        "eval_episodes=5".into(),
        format!("out_dir={}", out.join("run").display()),
    ]);
    let summary = commands::train(&run_cfg, None).unwrap();
    let top = summary.rows.iter().map(|r| r.eval_mean).fold(f64::NEG_INFINITY, f64::max);
    let argmax = summary.rows.iter().find(|r| r.eval_mean == top).unwrap();
    let name = checkpoint_name(argmax.step, argmax.eval_mean);
    let run_ok = summary.best == Some((argmax.step, top))
        && summary.best_checkpoint.as_ref().is_some_and(|p| p.ends_with(&name) && out.join("run").join(&name).exists());

    verdict(
        eval_ok && p > 0.01 && synthetic_ok && run_ok,
        format!(
            "eval ran {} games at epsilon {}; no-op chi-square p = {p:.3}; best-checkpoint rule {} on synthetic sequences, {} on a training run",
            report.scores.len(),
            report.epsilon,
            if synthetic_ok { "agrees" } else { "DISAGREES" },
            if run_ok { "agrees" } else { "DISAGREES" }
        ),
    )
}

// ----------------------------------------------------------------

fn main() {
    let wanted: Option<Vec<u32>> =
        std::env::var("DQN_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let run = |n: u32| wanted.as_ref().is_none_or(|w| w.contains(&n));
    let dir = tempfile::tempdir().unwrap();
    let breakout = (run(5) || run(6)).then(|| breakout_runs(&dir.path().join("breakout")));

    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, "gradient correctness", Box::new(gradient_correctness)),
        (2, "Bellman oracle", Box::new(bellman_oracle)),
        (3, "linear one-hot equals tabular", Box::new(linear_equivalence)),
        (4, "optimizer oracles and fuzz", Box::new(optimizer_oracles)),
        (5, "end-to-end learning", Box::new(|| end_to_end(breakout.as_ref()))),
        (6, "life-loss effect", Box::new(|| life_loss_effect(breakout.as_ref()))),
        (7, "replay properties", Box::new(replay_properties)),
        (8, "protocol transparency", Box::new(protocol_transparency)),
        (9, "throughput ordering", Box::new(|| throughput_ordering(&dir.path().join("bench")))),
        (10, "evaluation protocol", Box::new(|| evaluation_fidelity(&dir.path().join("eval")))),
    ];
    let mut failed = 0;
    for (n, name, check) in &criteria {
        if !run(*n) {
            println!("criterion {n:>2} {name}: SKIPPED");
            continue;
        }
        let v = check();
        failed += usize::from(!v.pass);
        println!("criterion {n:>2} {name}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

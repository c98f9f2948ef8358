use dqn_core::agent::*;
use dqn_core::checkpoint::Checkpoint;
use dqn_core::env::{GridWorldPixels, OneHotMdpEnv};
use dqn_core::mdp::gridworld::gridworld_mdp;
use dqn_core::mdp::{q_learning_update, QTable};
use dqn_core::neural::{InitScheme, QNetwork, Topology, Workspace};
use dqn_core::optim::{ClipMode, OptimizerConfig};
use dqn_core::seeded_rng;
use dqn_core::wrappers::WrapperConfig;
use dqn_core::wrappers::WrappedEnv;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn plain_wrapper() -> WrapperConfig {
    WrapperConfig { action_repeat: 1, history_len: 1, noop_max: 0, ..WrapperConfig::default() }
}

fn small_cfg(seed: u64) -> AgentConfig {
    AgentConfig {
        schedule: TrainSchedule {
            total_steps: 2_000,
            warmup_steps: 200,
            update_frequency: 4,
            target_sync: 100,
            eval_interval: 1_000,
            eval_episodes: 3,
            eval_epsilon: 0.05,
            batch_size: 8,
        },
        epsilon: EpsilonSchedule { start: 1.0, end: 0.1, anneal_steps: 1_000 },
        discount: 0.9,
        replay_capacity: 1_000,
        max_episode_steps: 50,
        seed,
        ..AgentConfig::default()
    }
}

fn gridworld_agent(seed: u64) -> Agent<f64, GridWorldPixels> {
    Agent::new(GridWorldPixels::new(), plain_wrapper(), Topology::toy(1, 32, 32, 5), small_cfg(seed)).unwrap()
}

fn outputs(net: &QNetwork<f64>, probes: &[Vec<f64>]) -> Vec<f64> {
    let mut ws = Workspace::new(net, 1);
    probes.iter().flat_map(|p| net.q_values(&mut ws, p).unwrap().to_vec()).collect()
}

fn random_probes(len: usize, n: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(42);
    (0..n).map(|_| (0..len).map(|_| rng.random::<f64>()).collect()).collect()
}

#[test]
fn warmup_fills_replay_without_learning() {
    let mut agent = gridworld_agent(1);
    let before = agent.online().clone_params();
    for t in 1..=200 {
        let info = agent.step().unwrap();
        assert!(!info.updated);
        assert_eq!(info.epsilon, 1.0);
        assert_eq!(agent.memory_len(), t);
    }
    assert_eq!(agent.online().clone_params(), before);
    assert_eq!(agent.updates(), 0);
}

#[test]
fn one_update_every_four_steps_after_warmup() {
    let mut agent = gridworld_agent(2);
    for t in 1..=1_000u64 {
        agent.step().unwrap();
        assert_eq!(agent.updates(), t.saturating_sub(200) / 4, "t = {t}");
    }
}

#[test]
fn sync_makes_networks_agree_and_target_stays_stale_between_syncs() {
    let mut agent = gridworld_agent(3);
    let probes = random_probes(1024, 3);
    let mut frozen = agent.target().clone_params();
    for _ in 0..1_000 {
        let info = agent.step().unwrap();
        if info.synced {
            assert_eq!(outputs(agent.online(), &probes), outputs(agent.target(), &probes));
            frozen = agent.target().clone_params();
        } else {
            assert_eq!(agent.target().clone_params(), frozen);
        }
    }
    assert!(agent.updates() > 0);
}

#[test]
fn targets_ignore_online_updates_until_sync() {
    let mut agent = gridworld_agent(4);
    for _ in 0..250 {
        agent.step().unwrap();
    }
    let batch = agent.sample_batch().unwrap();
    let y0 = agent.targets_for(&batch).unwrap();
    let online0 = agent.online().clone_params();
    for _ in 0..10 {
        agent.update().unwrap();
    }
    assert_ne!(agent.online().clone_params(), online0);
    assert_eq!(agent.targets_for(&batch).unwrap(), y0);
    agent.sync_target().unwrap();
    assert_ne!(agent.targets_for(&batch).unwrap(), y0);
}

#[test]
fn errors_entering_backprop_are_clipped() {
    // Rewards of 10 force large TD errors.
    let mdp = gridworld_mdp::<f64>().unwrap().with_reward_shift(10.0);
    let env = OneHotMdpEnv::new(mdp, 0, 0).unwrap();
    let mut cfg = small_cfg(5);
    cfg.clip = ClipMode::TdError;
    let mut agent: Agent<f64, _> = Agent::new(env, plain_wrapper(), Topology::linear(25, 5), cfg).unwrap();
    let mut saturated = false;
    for _ in 0..600 {
        if agent.step().unwrap().updated {
            for &e in agent.last_errors() {
                assert!((-1.0..=1.0).contains(&e), "error {e}");
                saturated |= e.abs() == 1.0;
            }
        }
    }
    assert!(saturated);
}

/// A one-hot linear network trained by SGD one sample at a time with a
/// per-step target sync is tabular Q-learning.
#[test]
fn linear_one_hot_agent_is_tabular_q_learning() {
    let lr = 0.1;
    let gamma = 0.9;
    let env = OneHotMdpEnv::new(gridworld_mdp::<f64>().unwrap(), 0, 0).unwrap();
    let net = QNetwork::<f64>::with_init(Topology::linear(25, 5), InitScheme::FanInUniform, 9).unwrap();
    let cfg = AgentConfig {
        schedule: TrainSchedule {
            total_steps: 10_000,
            warmup_steps: 0,
            update_frequency: 1,
            target_sync: 1,
            eval_interval: 10_000,
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
    let mut agent = Agent::with_network(env, plain_wrapper(), net, cfg).unwrap();
    let mut state = 0;
    for t in 0..10_000 {
        let info = agent.step().unwrap();
        assert!(info.updated && info.synced);
        let next = agent.env().env().state();
        q_learning_update(&mut table, state, info.action, info.reward, next, info.terminal, lr, gamma).unwrap();
        let worst = agent
            .online()
            .params()
            .iter()
            .zip(table.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "step {t}: max deviation {worst}");
        state = if info.terminal || info.truncated { 0 } else { next };
    }
}

#[test]
fn full_exploration_is_uniform() {
    let net = QNetwork::<f64>::with_init(Topology::linear(4, 5), InitScheme::FanInUniform, 1).unwrap();
    let mut ws = Workspace::new(&net, 1);
    let input = [0.3, 0.1, 0.9, 0.5];
    let mut rng = seeded_rng(8);
    let mut counts = [0.0f64; 5];
    for _ in 0..10_000 {
        counts[select_action(&net, &mut ws, &input, 1.0, &mut rng).unwrap()] += 1.0;
    }
    let expected = 10_000.0 / 5.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn greedy_action_and_ties() {
    let mut net = QNetwork::<f64>::with_init(Topology::linear(2, 3), InitScheme::Zero, 0).unwrap();
    let mut ws = Workspace::new(&net, 1);
    let mut rng = seeded_rng(0);
    for _ in 0..50 {
        assert_eq!(select_action(&net, &mut ws, &[1.0, 1.0], 0.0, &mut rng).unwrap(), 0);
    }
    // weights [in, out]: actions 1 and 2 tie at the top
    net.load_slice(&[0.0, 2.0, 2.0, 0.0, 1.0, 1.0]).unwrap();
    for _ in 0..50 {
        assert_eq!(select_action(&net, &mut ws, &[1.0, 1.0], 0.0, &mut rng).unwrap(), 1);
    }
}

#[test]
fn evaluation_reports_requested_games() {
    let net = QNetwork::<f64>::with_init(Topology::toy(1, 32, 32, 5), InitScheme::FanInUniform, 3).unwrap();
    let mut env = WrappedEnv::new(GridWorldPixels::new(), plain_wrapper(), 0).unwrap();
    let a = evaluate(&net, &mut env, 30, 0.05, 100, 7, 0).unwrap();
    assert_eq!(a.scores.len(), 30);
    assert!(a.is_consistent());
    let b = evaluate(&net, &mut env, 30, 0.05, 100, 7, 0).unwrap();
    assert_eq!(a.scores, b.scores);
}

#[test]
fn evaluation_refuses_life_loss_terminals() {
    let net = QNetwork::<f64>::with_init(Topology::toy(1, 32, 32, 5), InitScheme::FanInUniform, 3).unwrap();
    let cfg = WrapperConfig { life_loss_terminal: true, ..plain_wrapper() };
    let mut env = WrappedEnv::new(GridWorldPixels::new(), cfg, 0).unwrap();
    assert!(evaluate(&net, &mut env, 1, 0.05, 100, 7, 0).is_err());
}

#[test]
fn untrained_network_scores_like_random_play() {
    let net = QNetwork::<f64>::with_init(Topology::toy(1, 32, 32, 5), InitScheme::FanInUniform, 3).unwrap();
    let mut env = WrappedEnv::new(GridWorldPixels::new(), plain_wrapper(), 0).unwrap();
    let random = random_policy_scores(&mut env, 400, 30, 1).unwrap();
    let report = evaluate(&net, &mut env, 400, 1.0, 30, 2, 0).unwrap();
    let base = EvalReport::from_scores(0, 1.0, random, Vec::new());
    let se = ((base.sigma.powi(2) + report.sigma.powi(2)) / 400.0).sqrt();
    assert!((report.mean - base.mean).abs() < 4.0 * se + 1e-12, "{} vs {}", report.mean, base.mean);
}

#[test]
fn best_checkpoint_rule() {
    let mut best = BestTracker::new();
    for (step, mean) in [(1, 2.0), (2, 5.0), (3, 3.0)] {
        best.offer(step, mean);
    }
    assert_eq!(best.best(), Some((2, 5.0)));
    let mut best = BestTracker::new();
    for step in 1..=5 {
        assert!(best.offer(step, step as f64));
    }
    assert_eq!(best.best(), Some((5, 5.0)));
    assert!(!best.offer(6, 5.0));
}

#[test]
fn probe_tables() {
    let names: Vec<String> = ["No-op", "Up", "Down"].iter().map(|s| s.to_string()).collect();
    let zero = QNetwork::<f64>::with_init(Topology::linear(4, 3), InitScheme::Zero, 0).unwrap();
    let p = q_probe(&zero, &[0.5; 4], &names).unwrap();
    assert_eq!(p.values, vec![0.0; 3]);
    assert_eq!(p.argmax, 0);
    assert_eq!(p.to_csv().lines().next(), Some("action,q,greedy"));

    let mut agent = gridworld_agent(6);
    for _ in 0..400 {
        agent.step().unwrap();
    }
    agent.sync_target().unwrap();
    let names: Vec<String> = (0..5).map(|a| format!("a{a}")).collect();
    let input = random_probes(1024, 1).remove(0);
    assert_eq!(q_probe(agent.online(), &input, &names).unwrap(), q_probe(agent.target(), &input, &names).unwrap());
}

#[test]
fn checkpoint_restores_weights_and_optimizer() {
    let mut agent = gridworld_agent(7);
    for _ in 0..400 {
        agent.step().unwrap();
    }
    let ckpt = Checkpoint::capture(agent.online(), Some(agent.optimizer()), agent.steps());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.qnet");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);

    let mut fresh = gridworld_agent(99);
    fresh.restore(&back).unwrap();
    assert_eq!(fresh.online().clone_params(), agent.online().clone_params());
    assert_eq!(fresh.target().clone_params(), agent.online().clone_params());
    assert_eq!(fresh.optimizer().state, agent.optimizer().state);
    assert_eq!(fresh.steps(), 400);
}

#[test]
fn same_seed_same_run() {
    let run = |seed| {
        let mut agent = gridworld_agent(seed);
        let infos: Vec<StepInfo> = (0..800).map(|_| agent.step().unwrap()).collect();
        (infos, agent.online().clone_params())
    };
    let (a, pa) = run(10);
    let (b, pb) = run(10);
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let (_, pc) = run(11);
    assert_ne!(pa, pc);
}

#[test]
fn learning_curve_is_reproducible() {
    let curve = |seed| {
        let mut agent = gridworld_agent(seed);
        let mut eval_env = WrappedEnv::new(GridWorldPixels::new(), plain_wrapper(), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_training(&mut agent, &mut eval_env, Some(dir.path()), &mut |_, _| EvalControl::Continue).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("learning_curve.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some(CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + summary.reports.len());
        assert!(dir.path().join("latest.qnet").exists());
        let best = summary.best_checkpoint.clone().expect("a best checkpoint");
        assert!(dir.path().join(&best).exists());
        // everything but throughput
        summary.rows.iter().map(|r| (r.step, r.episodes, r.train_return_mean.to_bits(), r.eval_mean, r.eval_sigma)).collect::<Vec<_>>()
    };
    assert_eq!(curve(12), curve(12));
}

#[test]
fn naive_allocation_mode_follows_the_same_trajectory() {
    let run = |alloc| {
        let mut cfg = small_cfg(13);
        cfg.alloc = alloc;
        let mut agent: Agent<f64, _> = Agent::new(GridWorldPixels::new(), plain_wrapper(), Topology::toy(1, 32, 32, 5), cfg).unwrap();
        let infos: Vec<StepInfo> = (0..600).map(|_| agent.step().unwrap()).collect();
        (infos, agent.online().clone_params())
    };
    assert_eq!(run(AllocMode::Preallocated), run(AllocMode::Naive));
}

proptest! {
    #[test]
    fn epsilon_schedule_is_monotone_and_bounded(start in 0.0f64..=1.0, frac in 0.0f64..=1.0, n in 0u64..10_000, t in 0u64..20_000) {
        let s = EpsilonSchedule { start, end: start * frac, anneal_steps: n };
        let (a, b) = (s.value(t), s.value(t + 1));
        prop_assert!(b <= a + 1e-15);
        prop_assert!(a <= start + 1e-15 && a >= s.end - 1e-15);
        if t >= n {
            prop_assert_eq!(a, s.end);
        }
    }
}

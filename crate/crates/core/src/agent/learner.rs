use rand::Rng as _;

use super::{AgentConfig, AllocMode};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mdp::argmax;
use crate::neural::{GradientBuffer, QNetwork, Topology, Workspace};
use crate::optim::{clip_error, ClipMode, Optimizer};
use crate::replay::{Minibatch, NaiveReplay, ReplayMemory};
use crate::scalar::{derive_seed, seeded_rng, Rng, Scalar};
use crate::wrappers::{scale_pixels, WrapperConfig, WrappedEnv};

/// Epsilon-greedy over the network's action values; ties go to the lowest id.
///
/// Draws one uniform number per call, plus one more when exploring. The
/// forward pass runs only when acting greedily.
pub fn select_action<F: Scalar>(net: &QNetwork<F>, ws: &mut Workspace<F>, input: &[F], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    let u: f64 = rng.random();
    if u < epsilon {
        return Ok(rng.random_range(0..net.num_actions()));
    }
    Ok(argmax(net.q_values(ws, input)?))
}

/// `y_j = r_j` for terminal samples, else `r_j + gamma * max_a target_q[j, a]`.
pub fn td_targets<F: Scalar>(target_q: &[F], num_actions: usize, rewards: &[F], terminals: &[bool], gamma: F, out: &mut [F]) {
    for (j, y) in out.iter_mut().enumerate().take(rewards.len()) {
        *y = if terminals[j] {
            rewards[j]
        } else {
            let row = &target_q[j * num_actions..(j + 1) * num_actions];
            let best = row.iter().copied().fold(F::neg_infinity(), F::max);
            rewards[j] + gamma * best
        };
    }
}

/// What one agent step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub action: usize,
    /// Raw (unclipped) reward over the repeat window.
    pub reward: f64,
    pub terminal: bool,
    pub game_over: bool,
    pub truncated: bool,
    pub updated: bool,
    pub synced: bool,
    pub epsilon: f64,
}

enum Memory {
    Ring(ReplayMemory),
    Naive(NaiveReplay),
}

impl Memory {
    fn len(&self) -> usize {
        match self {
            Self::Ring(m) => m.len(),
            Self::Naive(m) => m.len(),
        }
    }

    fn insert(&mut self, phi: &[u8], action: usize, reward: f64, phi_next: &[u8], terminal: bool) -> Result<()> {
        match self {
            Self::Ring(m) => m.insert(phi, action, reward, phi_next, terminal),
            Self::Naive(m) => m.insert(phi, action, reward, phi_next, terminal),
        }
    }
}

struct UpdateBuffers<F> {
    train_ws: Workspace<F>,
    target_ws: Workspace<F>,
    targets: Vec<F>,
    out_grad: Vec<F>,
    errors: Vec<F>,
    grads: GradientBuffer<F>,
}

impl<F: Scalar> UpdateBuffers<F> {
    fn new(net: &QNetwork<F>, batch: usize) -> Self {
        Self {
            train_ws: Workspace::new(net, batch),
            target_ws: Workspace::new(net, batch),
            targets: vec![F::zero(); batch],
            out_grad: vec![F::zero(); batch * net.num_actions()],
            errors: vec![F::zero(); batch],
            grads: GradientBuffer::for_network(net),
        }
    }
}

/// One gradient step on the loss `mean_j 0.5 * e_j^2`, where
/// `e_j = y_j - Q(phi_j, a_j)` flows back through the taken action only.
fn minibatch_update<F: Scalar>(
    online: &mut QNetwork<F>,
    target: &QNetwork<F>,
    optimizer: &mut Optimizer<F>,
    cfg: &AgentConfig,
    batch: &Minibatch<F>,
    bufs: &mut UpdateBuffers<F>,
) -> Result<()> {
    let b = batch.size;
    let na = online.num_actions();
    let UpdateBuffers { train_ws, target_ws, targets, out_grad, errors, grads } = bufs;

    let tq = target.forward(target_ws, &batch.next_states, b)?;
    td_targets(tq, na, &batch.rewards, &batch.terminals, F::of(cfg.discount), targets);

    let q = online.forward(train_ws, &batch.states, b)?;
    out_grad.fill(F::zero());
    let scale = F::one() / F::of(b as f64);
    for j in 0..b {
        let a = batch.actions[j];
        let e = targets[j] - q[j * na + a];
        if !e.is_finite() {
            return Err(Error::NonFinite("td error"));
        }
        let e = if cfg.clip == ClipMode::TdError { clip_error(e)? } else { e };
        errors[j] = e;
        out_grad[j * na + a] = -e * scale;
    }
    online.backward(train_ws, out_grad, grads)?;
    if cfg.clip == ClipMode::ParamGrad {
        for g in grads.as_mut_slice() {
            *g = g.max(-F::one()).min(F::one());
        }
    }
    optimizer.step(online.params_mut(), grads.as_slice())
}

/// A learner bound to one training environment.
pub struct Agent<F: Scalar, E: Environment> {
    cfg: AgentConfig,
    env: WrappedEnv<E>,
    online: QNetwork<F>,
    target: QNetwork<F>,
    optimizer: Optimizer<F>,
    memory: Memory,
    act_ws: Workspace<F>,
    bufs: UpdateBuffers<F>,
    batch: Minibatch<F>,
    input: Vec<F>,
    prev: Vec<u8>,
    act_rng: Rng,
    sample_rng: Rng,
    step: u64,
    updates: u64,
    in_episode: bool,
    episode_return: f64,
    episode_steps: u64,
    returns_sum: f64,
    returns_count: u64,
    episodes_done: u64,
}

impl<F: Scalar, E: Environment> Agent<F, E> {
    /// Builds the online network from `topology` with `cfg.init`.
    pub fn new(env: E, wrapper: WrapperConfig, topology: Topology, cfg: AgentConfig) -> Result<Self> {
        let net = QNetwork::with_init(topology, cfg.init, derive_seed(cfg.seed, 1))?;
        Self::with_network(env, wrapper, net, cfg)
    }

    pub fn with_network(env: E, wrapper: WrapperConfig, net: QNetwork<F>, cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        let env = WrappedEnv::new(env, wrapper, derive_seed(cfg.seed, 2))?;
        let spec = env.env().spec();
        let frame_len = spec.frame_len();
        let m = wrapper.history_len;
        if net.input_len() != m * frame_len || net.num_actions() != spec.num_actions() {
            return Err(Error::Shape {
                expected: format!("network over {m} x {frame_len} pixels with {} actions", spec.num_actions()),
                actual: format!("network {}", net.topology()),
            });
        }
        let b = cfg.schedule.batch_size;
        let memory = match cfg.alloc {
            AllocMode::Preallocated => Memory::Ring(ReplayMemory::new(cfg.replay_capacity, m, frame_len)?),
            AllocMode::Naive => Memory::Naive(NaiveReplay::new(cfg.replay_capacity, m, frame_len)?),
        };
        let optimizer = Optimizer::new(cfg.optimizer, net.num_params())?;
        Ok(Self {
            act_ws: Workspace::new(&net, 1),
            bufs: UpdateBuffers::new(&net, b),
            batch: Minibatch::new(b, m, frame_len),
            input: vec![F::zero(); m * frame_len],
            prev: vec![0; m * frame_len],
            act_rng: seeded_rng(derive_seed(cfg.seed, 3)),
            sample_rng: seeded_rng(derive_seed(cfg.seed, 4)),
            target: net.clone(),
            online: net,
            optimizer,
            memory,
            env,
            cfg,
            step: 0,
            updates: 0,
            in_episode: false,
            episode_return: 0.0,
            episode_steps: 0,
            returns_sum: 0.0,
            returns_count: 0,
            episodes_done: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn env(&self) -> &WrappedEnv<E> {
        &self.env
    }

    pub fn online(&self) -> &QNetwork<F> {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut QNetwork<F> {
        &mut self.online
    }

    pub fn target(&self) -> &QNetwork<F> {
        &self.target
    }

    pub fn optimizer(&self) -> &Optimizer<F> {
        &self.optimizer
    }

    pub fn optimizer_mut(&mut self) -> &mut Optimizer<F> {
        &mut self.optimizer
    }

    /// The deduplicating replay memory (absent in naive-allocation mode).
    pub fn replay(&self) -> Option<&ReplayMemory> {
        match &self.memory {
            Memory::Ring(m) => Some(m),
            Memory::Naive(_) => None,
        }
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    /// Agent steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Continues the step counter (schedules included) from `step`, e.g. after
    /// restoring a checkpoint.
    pub fn set_steps(&mut self, step: u64) {
        self.step = step;
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Learner episodes finished so far (life-loss pseudo-episodes count).
    pub fn episodes(&self) -> u64 {
        self.episodes_done
    }

    /// Clipped errors of the last minibatch update.
    pub fn last_errors(&self) -> &[F] {
        &self.bufs.errors
    }

    pub fn epsilon(&self) -> f64 {
        let warmup = self.cfg.schedule.warmup_steps;
        if self.step < warmup {
            1.0
        } else {
            self.cfg.epsilon.value(self.step - warmup)
        }
    }

    /// Sum and count of returns of episodes finished since the last call.
    pub fn take_train_returns(&mut self) -> (f64, u64) {
        let out = (self.returns_sum, self.returns_count);
        self.returns_sum = 0.0;
        self.returns_count = 0;
        out
    }

    pub fn sync_target(&mut self) -> Result<()> {
        self.target.copy_params_from(&self.online)
    }

    /// Targets the stale network assigns to `batch`.
    pub fn targets_for(&self, batch: &Minibatch<F>) -> Result<Vec<F>> {
        let mut ws = Workspace::new(&self.target, batch.size);
        let tq = self.target.forward(&mut ws, &batch.next_states, batch.size)?;
        let mut y = vec![F::zero(); batch.size];
        td_targets(tq, self.target.num_actions(), &batch.rewards, &batch.terminals, F::of(self.cfg.discount), &mut y);
        Ok(y)
    }

    /// Draws a minibatch from replay without updating anything.
    pub fn sample_batch(&mut self) -> Result<Minibatch<F>> {
        match &self.memory {
            Memory::Ring(m) => m.sample(self.cfg.schedule.batch_size, &mut self.sample_rng),
            Memory::Naive(m) => m.sample(self.cfg.schedule.batch_size, &mut self.sample_rng),
        }
    }

    /// One minibatch update from replay.
    pub fn update(&mut self) -> Result<()> {
        match &self.memory {
            Memory::Ring(m) => {
                m.sample_into(&mut self.batch, &mut self.sample_rng)?;
                minibatch_update(&mut self.online, &self.target, &mut self.optimizer, &self.cfg, &self.batch, &mut self.bufs)?;
            }
            Memory::Naive(m) => {
                let batch = m.sample::<F>(self.cfg.schedule.batch_size, &mut self.sample_rng)?;
                let mut bufs = UpdateBuffers::new(&self.online, batch.size);
                minibatch_update(&mut self.online, &self.target, &mut self.optimizer, &self.cfg, &batch, &mut bufs)?;
                self.bufs.errors.copy_from_slice(&bufs.errors);
            }
        }
        self.updates += 1;
        Ok(())
    }

    /// One agent step: act, store the experience, and update/sync on schedule.
    pub fn step(&mut self) -> Result<StepInfo> {
        if !self.in_episode {
            self.env.begin_episode()?;
            self.in_episode = true;
            self.episode_return = 0.0;
            self.episode_steps = 0;
        }
        let epsilon = self.epsilon();
        let action = match self.cfg.alloc {
            AllocMode::Preallocated => {
                self.prev.copy_from_slice(self.env.stack().as_bytes());
                scale_pixels(&self.prev, &mut self.input);
                select_action(&self.online, &mut self.act_ws, &self.input, epsilon, &mut self.act_rng)?
            }
            AllocMode::Naive => {
                self.prev = self.env.stack().as_bytes().to_vec();
                let mut input = vec![F::zero(); self.prev.len()];
                scale_pixels(&self.prev, &mut input);
                let mut ws = Workspace::new(&self.online, 1);
                select_action(&self.online, &mut ws, &input, epsilon, &mut self.act_rng)?
            }
        };

        let out = self.env.step(action)?;
        let stored = if self.cfg.reward_clip { out.reward.clamp(-1.0, 1.0) } else { out.reward };
        self.episode_return += out.reward;
        self.episode_steps += 1;
        let max = self.cfg.max_episode_steps;
        let truncated = !out.terminal && max > 0 && self.episode_steps >= max;
        self.memory.insert(&self.prev, action, stored, self.env.stack().as_bytes(), out.terminal)?;
        self.step += 1;

        let s = &self.cfg.schedule;
        let warmup = s.warmup_steps;
        let mut updated = false;
        if self.step > warmup && (self.step - warmup) % s.update_frequency == 0 && self.memory.len() >= s.batch_size {
            self.update()?;
            updated = true;
        }
        let synced = self.step % self.cfg.schedule.target_sync == 0;
        if synced {
            self.sync_target()?;
        }

        if out.terminal || truncated {
            if truncated {
                self.env.end_game();
            }
            self.in_episode = false;
            self.returns_sum += self.episode_return;
            self.returns_count += 1;
            self.episodes_done += 1;
        }
        Ok(StepInfo {
            action,
            reward: out.reward,
            terminal: out.terminal,
            game_over: out.game_over,
            truncated,
            updated,
            synced,
            epsilon,
        })
    }
}

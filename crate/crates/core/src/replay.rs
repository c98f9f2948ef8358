//! Fixed-capacity experience memory.
//!
//! Consecutive experiences overlap in all but one frame, so [`ReplayMemory`]
//! keeps a ring of physical frames and stores, per experience, only the
//! absolute index of its post-state's newest frame. `phi` and `phi_next` are
//! rebuilt from that index; frames before the start of a segment (an episode,
//! or any run of contiguous inserts) are replaced by the segment's first
//! frame, which is exactly how a freshly filled [`FrameStack`] looks.
//!
//! [`NaiveReplay`] stores owned copies in a `VecDeque`; it is the reference
//! model in tests and the allocation-heavy baseline in benchmarks.

use std::collections::VecDeque;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::scalar::{Rng, Scalar};
use crate::wrappers::{scale_pixels, FrameStack};

/// An owned `(phi, a, r, phi_next, terminal)` tuple. `phi` and `phi_next`
/// are `history` frames each, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub phi: Vec<u8>,
    pub action: usize,
    pub reward: f64,
    pub phi_next: Vec<u8>,
    pub terminal: bool,
}

/// Minibatch buffers, allocated once and refilled by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<F> {
    pub size: usize,
    /// `size x history x frame_len`, scaled to [0, 1].
    pub states: Vec<F>,
    pub next_states: Vec<F>,
    pub actions: Vec<usize>,
    pub rewards: Vec<F>,
    pub terminals: Vec<bool>,
    /// Sampled positions in insertion order, 0 = oldest (diagnostics and tests).
    pub indices: Vec<usize>,
}

impl<F: Scalar> Minibatch<F> {
    pub fn new(size: usize, history: usize, frame_len: usize) -> Self {
        let n = size * history * frame_len;
        Self {
            size,
            states: vec![F::zero(); n],
            next_states: vec![F::zero(); n],
            actions: vec![0; size],
            rewards: vec![F::zero(); size],
            terminals: vec![false; size],
            indices: vec![0; size],
        }
    }
}

fn shape_err(expected: usize, actual: usize) -> Error {
    Error::Shape {
        expected: format!("{expected} bytes"),
        actual: format!("{actual} bytes"),
    }
}

fn check_experience(history: usize, frame_len: usize, phi: &[u8], reward: f64, phi_next: &[u8]) -> Result<()> {
    let len = history * frame_len;
    if phi.len() != len {
        return Err(shape_err(len, phi.len()));
    }
    if phi_next.len() != len {
        return Err(shape_err(len, phi_next.len()));
    }
    if !reward.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    if phi[frame_len..] != phi_next[..len - frame_len] {
        return Err(Error::Shape {
            expected: "phi_next to be phi shifted by one frame".into(),
            actual: "unrelated frame stacks".into(),
        });
    }
    Ok(())
}

/// Preallocated ring of experiences over a deduplicated frame store.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    history: usize,
    frame_len: usize,

    frames: Vec<u8>,
    frame_cap: usize,
    /// Absolute index of the first frame of each stored frame's segment.
    segment_start: Vec<u64>,
    /// Absolute index the next stored frame will get.
    next_frame: u64,
    /// Post-frame index of the last insert, if a later insert may continue it.
    open_tail: Option<u64>,

    post: Vec<u64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    terminals: Vec<bool>,
    cursor: usize,
    size: usize,
    early_evictions: u64,
}

impl ReplayMemory {
    /// Room for `capacity` experiences. The frame store holds
    /// `2 * capacity + history + 1` frames: enough when every segment starts
    /// from a filled stack, which is how the training loop inserts. Other
    /// patterns may evict the oldest experiences early; size the store with
    /// [`Self::worst_case_frames`] to rule that out.
    pub fn new(capacity: usize, history: usize, frame_len: usize) -> Result<Self> {
        Self::with_frame_capacity(capacity, history, frame_len, (2 * capacity + history + 1).max(2 * history + 2))
    }

    /// Frame-store size under which no insert pattern ever evicts early.
    pub fn worst_case_frames(capacity: usize, history: usize) -> usize {
        capacity * (history + 1) + history + 1
    }

    pub fn with_frame_capacity(capacity: usize, history: usize, frame_len: usize, frame_cap: usize) -> Result<Self> {
        if capacity == 0 || history == 0 || frame_len == 0 {
            return Err(Error::Config("replay capacity, history and frame size must be positive".into()));
        }
        if frame_cap < 2 * history + 2 {
            return Err(Error::Config(format!("frame store of {frame_cap} frames cannot hold one experience")));
        }
        Ok(Self {
            capacity,
            history,
            frame_len,
            frames: vec![0; frame_cap * frame_len],
            frame_cap,
            segment_start: vec![0; frame_cap],
            next_frame: 0,
            open_tail: None,
            post: vec![0; capacity],
            actions: vec![0; capacity],
            rewards: vec![0.0; capacity],
            terminals: vec![false; capacity],
            cursor: 0,
            size: 0,
            early_evictions: 0,
        })
    }

    /// Experiences dropped before their turn because the frame store ran out.
    pub fn early_evictions(&self) -> u64 {
        self.early_evictions
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Physical frames written so far (including overwritten ones).
    pub fn frames_stored(&self) -> u64 {
        self.next_frame
    }

    /// Frames referenced by the live experiences.
    pub fn live_frames(&self) -> u64 {
        if self.size == 0 {
            return 0;
        }
        self.next_frame - self.min_needed(self.oldest_slot())
    }

    fn oldest_slot(&self) -> usize {
        (self.cursor + self.capacity - self.size) % self.capacity
    }

    fn frame_slice(&self, abs: u64) -> &[u8] {
        let slot = (abs % self.frame_cap as u64) as usize;
        &self.frames[slot * self.frame_len..(slot + 1) * self.frame_len]
    }

    fn seg_start(&self, abs: u64) -> u64 {
        self.segment_start[(abs % self.frame_cap as u64) as usize]
    }

    /// Oldest frame index an experience needs for its `phi`.
    fn min_needed(&self, slot: usize) -> u64 {
        let p = self.post[slot];
        p.saturating_sub(self.history as u64).max(self.seg_start(p))
    }

    /// Frame `i` (0 = oldest) of the stack whose newest frame is `newest`.
    fn stack_frame(&self, newest: u64, i: usize) -> &[u8] {
        let back = (self.history - 1 - i) as u64;
        let start = self.seg_start(newest);
        let abs = newest.saturating_sub(back).max(start);
        self.frame_slice(abs)
    }

    fn stack_matches(&self, newest: u64, stack: &[u8]) -> bool {
        stack
            .chunks_exact(self.frame_len)
            .enumerate()
            .all(|(i, f)| self.stack_frame(newest, i) == f)
    }

    fn push_frame(&mut self, frame: &[u8], start: Option<u64>) {
        let abs = self.next_frame;
        if abs >= self.frame_cap as u64 {
            let overwritten = abs - self.frame_cap as u64;
            while self.size > 0 && self.min_needed(self.oldest_slot()) <= overwritten {
                self.size -= 1;
                self.early_evictions += 1;
            }
            if self.open_tail.is_some_and(|t| t.saturating_sub(self.history as u64) <= overwritten) {
                self.open_tail = None;
            }
        }
        let slot = (abs % self.frame_cap as u64) as usize;
        self.frames[slot * self.frame_len..(slot + 1) * self.frame_len].copy_from_slice(frame);
        self.segment_start[slot] = start.unwrap_or_else(|| self.seg_start(abs - 1));
        self.next_frame += 1;
    }

    /// Stores one experience; `phi_next` must be `phi` shifted by one frame.
    pub fn insert(&mut self, phi: &[u8], action: usize, reward: f64, phi_next: &[u8], terminal: bool) -> Result<()> {
        check_experience(self.history, self.frame_len, phi, reward, phi_next)?;
        let fl = self.frame_len;
        let continues = self.open_tail.is_some_and(|t| self.stack_matches(t, phi));
        if !continues {
            // new segment: skip leading frames that the clamp reproduces
            let mut first = 0;
            while first + 1 < self.history && phi[first * fl..(first + 1) * fl] == phi[(first + 1) * fl..(first + 2) * fl] {
                first += 1;
            }
            let start = self.next_frame;
            self.push_frame(&phi[first * fl..(first + 1) * fl], Some(start));
            for i in first + 1..self.history {
                self.push_frame(&phi[i * fl..(i + 1) * fl], None);
            }
        }
        let newest = &phi_next[(self.history - 1) * fl..];
        self.push_frame(newest, None);
        let post = self.next_frame - 1;

        self.post[self.cursor] = post;
        self.actions[self.cursor] = action;
        self.rewards[self.cursor] = reward;
        self.terminals[self.cursor] = terminal;
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        self.open_tail = (!terminal).then_some(post);
        Ok(())
    }

    pub fn insert_stacks(&mut self, phi: &FrameStack, action: usize, reward: f64, phi_next: &FrameStack, terminal: bool) -> Result<()> {
        self.insert(phi.as_bytes(), action, reward, phi_next.as_bytes(), terminal)
    }

    pub fn insert_experience(&mut self, e: &Experience) -> Result<()> {
        self.insert(&e.phi, e.action, e.reward, &e.phi_next, e.terminal)
    }

    /// Experience `i` in insertion order (0 = oldest live).
    pub fn get(&self, i: usize) -> Result<Experience> {
        if i >= self.size {
            return Err(Error::OutOfRange { what: "replay index", index: i, limit: self.size });
        }
        Ok(self.experience_at_slot((self.oldest_slot() + i) % self.capacity))
    }

    pub fn to_vec(&self) -> Vec<Experience> {
        (0..self.size).map(|i| self.get(i).expect("in range")).collect()
    }

    fn experience_at_slot(&self, slot: usize) -> Experience {
        let p = self.post[slot];
        let mut phi = Vec::with_capacity(self.history * self.frame_len);
        let mut phi_next = Vec::with_capacity(self.history * self.frame_len);
        for i in 0..self.history {
            phi.extend_from_slice(self.phi_frame(p, i));
            phi_next.extend_from_slice(self.stack_frame(p, i));
        }
        Experience {
            phi,
            action: self.actions[slot],
            reward: self.rewards[slot],
            phi_next,
            terminal: self.terminals[slot],
        }
    }

    /// Frame `i` of the pre-state of the experience whose post frame is `p`.
    fn phi_frame(&self, p: u64, i: usize) -> &[u8] {
        let start = self.seg_start(p);
        let back = (self.history - i) as u64;
        self.frame_slice(p.saturating_sub(back).max(start))
    }

    /// Draws `batch.size` experiences uniformly with replacement.
    pub fn sample_into<F: Scalar>(&self, batch: &mut Minibatch<F>, rng: &mut Rng) -> Result<()> {
        if self.size < batch.size || self.size == 0 {
            return Err(Error::InsufficientSamples { size: self.size, requested: batch.size });
        }
        let stride = self.history * self.frame_len;
        if batch.states.len() != batch.size * stride {
            return Err(shape_err(batch.size * stride, batch.states.len()));
        }
        for j in 0..batch.size {
            let k = rng.random_range(0..self.size);
            let slot = (self.oldest_slot() + k) % self.capacity;
            let p = self.post[slot];
            let (s, n) = (&mut batch.states[j * stride..(j + 1) * stride], &mut batch.next_states[j * stride..(j + 1) * stride]);
            for i in 0..self.history {
                let range = i * self.frame_len..(i + 1) * self.frame_len;
                scale_pixels(self.phi_frame(p, i), &mut s[range.clone()]);
                scale_pixels(self.stack_frame(p, i), &mut n[range]);
            }
            batch.indices[j] = k;
            batch.actions[j] = self.actions[slot];
            batch.rewards[j] = F::of(self.rewards[slot]);
            batch.terminals[j] = self.terminals[slot];
        }
        Ok(())
    }

    pub fn sample<F: Scalar>(&self, batch_size: usize, rng: &mut Rng) -> Result<Minibatch<F>> {
        let mut b = Minibatch::new(batch_size, self.history, self.frame_len);
        self.sample_into(&mut b, rng)?;
        Ok(b)
    }
}

/// Unbounded-deque-plus-trim replay with owned copies of every stack.
#[derive(Debug, Clone)]
pub struct NaiveReplay {
    capacity: usize,
    history: usize,
    frame_len: usize,
    items: VecDeque<Experience>,
}

impl NaiveReplay {
    pub fn new(capacity: usize, history: usize, frame_len: usize) -> Result<Self> {
        if capacity == 0 || history == 0 || frame_len == 0 {
            return Err(Error::Config("replay capacity, history and frame size must be positive".into()));
        }
        Ok(Self { capacity, history, frame_len, items: VecDeque::new() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn insert(&mut self, phi: &[u8], action: usize, reward: f64, phi_next: &[u8], terminal: bool) -> Result<()> {
        check_experience(self.history, self.frame_len, phi, reward, phi_next)?;
        self.items.push_back(Experience {
            phi: phi.to_vec(),
            action,
            reward,
            phi_next: phi_next.to_vec(),
            terminal,
        });
        while self.items.len() > self.capacity {
            self.items.pop_front();
        }
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Allocates a fresh minibatch on every call.
    pub fn sample<F: Scalar>(&self, batch_size: usize, rng: &mut Rng) -> Result<Minibatch<F>> {
        if self.items.len() < batch_size || self.items.is_empty() {
            return Err(Error::InsufficientSamples { size: self.items.len(), requested: batch_size });
        }
        let mut b = Minibatch::<F>::new(batch_size, self.history, self.frame_len);
        let stride = self.history * self.frame_len;
        for j in 0..batch_size {
            let k = rng.random_range(0..self.items.len());
            let e = &self.items[k];
            let mut states = vec![F::zero(); stride];
            let mut next = vec![F::zero(); stride];
            scale_pixels(&e.phi, &mut states);
            scale_pixels(&e.phi_next, &mut next);
            b.states[j * stride..(j + 1) * stride].copy_from_slice(&states);
            b.next_states[j * stride..(j + 1) * stride].copy_from_slice(&next);
            b.indices[j] = k;
            b.actions[j] = e.action;
            b.rewards[j] = F::of(e.reward);
            b.terminals[j] = e.terminal;
        }
        Ok(b)
    }
}

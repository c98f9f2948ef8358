use super::{EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::scalar::{seeded_rng, Rng};

/// Presents a tabular MDP as a `num_states x 1` frame holding a one-hot
/// encoding of the current state (255 at the state's pixel).
#[derive(Debug, Clone)]
pub struct OneHotMdpEnv {
    mdp: TabularMdp<f64>,
    spec: EnvSpec,
    start: usize,
    state: usize,
    terminal: bool,
    rng: Rng,
}

impl OneHotMdpEnv {
    pub fn new(mdp: TabularMdp<f64>, start: usize, noop_action: usize) -> Result<Self> {
        if start >= mdp.num_states() || mdp.is_terminal(start) {
            return Err(Error::Config(format!("start state {start} is missing or terminal")));
        }
        let names: Vec<String> = (0..mdp.num_actions()).map(|a| format!("a{a}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let spec = EnvSpec::new(mdp.num_states(), 1, &names, noop_action, None)?;
        Ok(Self {
            mdp,
            spec,
            start,
            state: start,
            terminal: false,
            rng: seeded_rng(0),
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn mdp(&self) -> &TabularMdp<f64> {
        &self.mdp
    }

    fn fill(&self, reward: f64, out: &mut EnvStep) {
        out.frame.clear();
        out.frame.resize(self.mdp.num_states(), 0);
        out.frame[self.state] = 255;
        out.reward = reward;
        out.terminal = self.terminal;
        out.lives = 1;
    }
}

impl Environment for OneHotMdpEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_into(&mut self, seed: u64, out: &mut EnvStep) -> Result<()> {
        self.state = self.start;
        self.terminal = false;
        self.rng = seeded_rng(seed);
        self.fill(0.0, out);
        Ok(())
    }

    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()> {
        self.spec.check_action(action)?;
        if self.terminal {
            return Err(Error::SteppedTerminal);
        }
        let (next, reward) = self.mdp.step(self.state, action, &mut self.rng)?;
        self.state = next;
        self.terminal = self.mdp.is_terminal(next);
        self.fill(reward, out);
        Ok(())
    }

    fn lives(&self) -> u32 {
        1
    }
}

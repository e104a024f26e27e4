use super::{Environment, StepResult};
use crate::error::{EbeError, Result};

pub const CHAIN_STATES: usize = 21;
pub const CHAIN_START: usize = 10;
pub const CHAIN_TERMINALS: [usize; 2] = [0, CHAIN_STATES - 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainAction {
    Left = 0,
    Right = 1,
}

impl ChainAction {
    pub fn from_index(a: usize) -> Option<Self> {
        match a {
            0 => Some(Self::Left),
            1 => Some(Self::Right),
            _ => None,
        }
    }
}

/// 21-state corridor starting in the middle; entering either end pays 1.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    state: usize,
    steps: usize,
}

impl Default for ChainEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl ChainEnv {
    pub fn new() -> Self {
        Self { state: CHAIN_START, steps: 0 }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn is_terminal_state(s: usize) -> bool {
        CHAIN_TERMINALS.contains(&s)
    }

    /// Deterministic dynamics: `(next_state, reward, terminal)`.
    ///
    /// Panics if `state` is terminal or out of range.
    pub fn transition(state: usize, action: ChainAction) -> (usize, f64, bool) {
        assert!(state > 0 && state < CHAIN_STATES - 1, "no transition out of state {state}");
        let next = match action {
            ChainAction::Left => state - 1,
            ChainAction::Right => state + 1,
        };
        let terminal = Self::is_terminal_state(next);
        (next, if terminal { 1.0 } else { 0.0 }, terminal)
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; CHAIN_STATES];
        v[state] = 1.0;
        v
    }
}

impl Environment for ChainEnv {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        CHAIN_STATES
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = CHAIN_START;
        self.steps = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.is_done() {
            return Err(EbeError::EpisodeOver);
        }
        let action = ChainAction::from_index(action)
            .ok_or_else(|| EbeError::OutOfRange(format!("chain action {action}")))?;
        let (next, reward, terminal) = Self::transition(self.state, action);
        self.state = next;
        self.steps += 1;
        Ok(StepResult { observation: self.observe(), reward, terminal, truncated: false, steps: self.steps })
    }

    fn observe(&self) -> Vec<f64> {
        Self::one_hot(self.state)
    }

    fn state_key(&self) -> u64 {
        self.state as u64
    }

    fn state_index(&self) -> Option<usize> {
        Some(self.state)
    }

    fn is_done(&self) -> bool {
        Self::is_terminal_state(self.state)
    }
}

//! Desk-scale environments.

mod breakout;
mod chain;

pub use breakout::{BreakoutAction, MiniBreakout, BREAKOUT_ACTIONS, BREAKOUT_BRICKS, BREAKOUT_HEIGHT, BREAKOUT_WIDTH};
pub use chain::{ChainAction, ChainEnv, CHAIN_START, CHAIN_STATES, CHAIN_TERMINALS};

use crate::error::Result;

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The episode ended naturally; no bootstrapping past this step.
    pub terminal: bool,
    /// The episode was cut off by a step limit.
    pub truncated: bool,
    /// Steps taken since the last reset, including this one.
    pub steps: usize,
}

/// Episodic environment with a discrete action set.
pub trait Environment {
    fn num_actions(&self) -> usize;

    fn observation_dim(&self) -> usize;

    /// Starts a new episode and returns its first observation.
    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    fn observe(&self) -> Vec<f64>;

    /// Identifier of the current state for exact visit counting.
    fn state_key(&self) -> u64;

    /// Row index for tabular learners, if the state space is enumerable.
    fn state_index(&self) -> Option<usize> {
        None
    }

    /// True once the episode has ended and `reset` is required.
    fn is_done(&self) -> bool;
}

/// Environments selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Chain,
    MiniBreakout,
}

impl EnvKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "chain" => Some(Self::Chain),
            "mini_breakout" => Some(Self::MiniBreakout),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Chain => "chain",
            Self::MiniBreakout => "mini_breakout",
        }
    }

    /// Builds an environment; `seed` drives any randomness it has.
    pub fn build(self, seed: u64, max_steps: usize) -> Box<dyn Environment + Send> {
        match self {
            Self::Chain => Box::new(ChainEnv::new()),
            Self::MiniBreakout => Box::new(MiniBreakout::new(seed, max_steps)),
        }
    }
}

/// FNV-1a over a byte stream; used to key observations for counting.
pub(crate) fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

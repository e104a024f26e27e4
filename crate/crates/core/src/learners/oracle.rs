use super::tabular::QTable;
use crate::envs::{ChainAction, ChainEnv, CHAIN_STATES, CHAIN_TERMINALS};
use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100_000;

/// Largest `|Q(s,a) − (r + γ max_b Q(s′,b))|` over non-terminal chain pairs.
pub fn chain_bellman_residual<F: Scalar>(q: &QTable<F>, gamma: F) -> F {
    let mut worst = F::zero();
    for s in 1..CHAIN_STATES - 1 {
        for action in [ChainAction::Left, ChainAction::Right] {
            let (next, reward, terminal) = ChainEnv::transition(s, action);
            let backup = F::lit(reward) + if terminal { F::zero() } else { gamma * q.max_value(next) };
            worst = worst.max((q.get(s, action as usize) - backup).abs());
        }
    }
    worst
}

/// Exact `Q*` of the chain by value iteration, stopped once the Bellman
/// residual falls below `tolerance`. Terminal rows are zero and marked.
pub fn value_iteration_oracle<F: Scalar>(gamma: F, tolerance: F) -> Result<QTable<F>> {
    if !(gamma > F::zero() && gamma < F::one()) {
        return Err(EbeError::OutOfRange(format!("gamma = {gamma} must be in (0, 1)")));
    }
    if !(tolerance > F::zero()) {
        return Err(EbeError::OutOfRange(format!("tolerance = {tolerance} must be positive")));
    }
    let mut q = QTable::new(CHAIN_STATES, 2, F::one(), gamma)?.with_terminal_rows(&CHAIN_TERMINALS)?;
    for _ in 0..MAX_SWEEPS {
        let prev = q.clone();
        for s in 1..CHAIN_STATES - 1 {
            for action in [ChainAction::Left, ChainAction::Right] {
                let (next, reward, terminal) = ChainEnv::transition(s, action);
                let backup = F::lit(reward) + if terminal { F::zero() } else { gamma * prev.max_value(next) };
                q.set(s, action as usize, backup);
            }
        }
        if chain_bellman_residual(&q, gamma) < tolerance {
            return Ok(q);
        }
    }
    Err(EbeError::OutOfRange("value iteration did not reach the tolerance".into()))
}

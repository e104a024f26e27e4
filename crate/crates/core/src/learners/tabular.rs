use rand::Rng;

use crate::entropy::argmax;
use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// `(state, action, reward, next state, terminal)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S, F> {
    pub state: S,
    pub action: usize,
    pub reward: F,
    pub next_state: S,
    pub terminal: bool,
}

/// Dense `states × actions` table of Q-estimates with its TD parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<F> {
    states: usize,
    actions: usize,
    values: Vec<F>,
    terminal: Vec<bool>,
    alpha: F,
    gamma: F,
}

fn check_rate<F: Scalar>(name: &str, v: F) -> Result<()> {
    if v > F::zero() && v <= F::one() {
        Ok(())
    } else {
        Err(EbeError::OutOfRange(format!("{name} = {v} must be in (0, 1]")))
    }
}

impl<F: Scalar> QTable<F> {
    /// Zero-initialised table.
    pub fn new(states: usize, actions: usize, alpha: F, gamma: F) -> Result<Self> {
        Self::from_values(states, actions, vec![F::zero(); states * actions], alpha, gamma)
    }

    /// Table with entries drawn uniformly from `[-scale, scale]`.
    pub fn random_uniform<R: Rng + ?Sized>(
        states: usize,
        actions: usize,
        alpha: F,
        gamma: F,
        scale: F,
        rng: &mut R,
    ) -> Result<Self> {
        let s = scale.to_f64_lossy();
        let values = (0..states * actions)
            .map(|_| F::lit(rng.random_range(-s..=s)))
            .collect();
        Self::from_values(states, actions, values, alpha, gamma)
    }

    pub fn from_values(states: usize, actions: usize, values: Vec<F>, alpha: F, gamma: F) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(EbeError::Empty("q-table dimensions"));
        }
        if values.len() != states * actions {
            return Err(EbeError::DimensionMismatch { expected: states * actions, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EbeError::NonFinite("q-table entry".into()));
        }
        check_rate("alpha", alpha)?;
        check_rate("gamma", gamma)?;
        Ok(Self { states, actions, values, terminal: vec![false; states], alpha, gamma })
    }

    /// Marks rows that correspond to terminal states.
    pub fn with_terminal_rows(mut self, rows: &[usize]) -> Result<Self> {
        for &r in rows {
            if r >= self.states {
                return Err(EbeError::OutOfRange(format!("terminal row {r} >= {}", self.states)));
            }
            self.terminal[r] = true;
        }
        Ok(self)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn is_terminal_row(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn get(&self, s: usize, a: usize) -> F {
        self.values[s * self.actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: F) {
        self.values[s * self.actions + a] = v;
    }

    pub fn greedy_action(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    pub fn max_value(&self, s: usize) -> F {
        self.row(s).iter().copied().fold(F::neg_infinity(), F::max)
    }

    /// One-step Q-learning update; returns the TD error.
    pub fn td_update(&mut self, tr: &Transition<usize, F>) -> Result<F> {
        if tr.state >= self.states || tr.next_state >= self.states {
            return Err(EbeError::OutOfRange(format!(
                "state {} or {} >= {}",
                tr.state, tr.next_state, self.states
            )));
        }
        if tr.action >= self.actions {
            return Err(EbeError::OutOfRange(format!("action {} >= {}", tr.action, self.actions)));
        }
        if !tr.reward.is_finite() {
            return Err(EbeError::NonFinite("reward".into()));
        }
        let bootstrap = if tr.terminal { F::zero() } else { self.gamma * self.max_value(tr.next_state) };
        let old = self.get(tr.state, tr.action);
        let delta = tr.reward + bootstrap - old;
        self.set(tr.state, tr.action, old + self.alpha * delta);
        Ok(delta)
    }
}

/// `Σ (Q*(s,a) − Q(s,a))²` over the rows `oracle` does not mark terminal.
pub fn squared_error<F: Scalar>(learned: &QTable<F>, oracle: &QTable<F>) -> Result<F> {
    if learned.states != oracle.states || learned.actions != oracle.actions {
        return Err(EbeError::DimensionMismatch {
            expected: oracle.states * oracle.actions,
            got: learned.states * learned.actions,
        });
    }
    let mut total = F::zero();
    for s in (0..oracle.states).filter(|&s| !oracle.terminal[s]) {
        for (q, q_star) in learned.row(s).iter().zip(oracle.row(s)) {
            let d = *q_star - *q;
            total += d * d;
        }
    }
    Ok(total)
}

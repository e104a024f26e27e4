//! Action-selection strategies.
//!
//! Every strategy picks an action from the Q-values of the current state.
//! Count-based strategies add an optimistic bonus at selection time only and
//! record the chosen pair; they never alter the learning target.

mod counts;
mod density;
mod hashing;
mod schedule;

pub use counts::{count_bonus, mbie_eb_bonus, ucb_bonus, VisitCounter, COUNT_OFFSET, UNTRIED_BONUS};
pub use density::{discretize, FactoredDensityModel};
pub use hashing::HashCounter;
pub use schedule::{EpsilonVariant, LinearSchedule};

use rand::Rng;

use crate::entropy::{action_distribution, ActionDistribution, argmax, explore_decision, scaled_entropy, validate_q};
use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Default number of SimHash bits.
pub const DEFAULT_HASH_BITS: usize = 16;

/// Categories per feature for the pseudo-count density model.
const DENSITY_LEVELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind<F> {
    Greedy,
    Ebe,
    EpsilonGreedy(LinearSchedule<F>),
    Boltzmann(LinearSchedule<F>),
    Ucb,
    MbieEb { beta: F },
    PseudoCount { beta: F },
    HashCount { beta: F, bits: usize },
}

impl<F: Scalar> StrategyKind<F> {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Ebe => "ebe",
            Self::EpsilonGreedy(_) => "epsilon_greedy",
            Self::Boltzmann(_) => "boltzmann",
            Self::Ucb => "ucb",
            Self::MbieEb { .. } => "mbie_eb",
            Self::PseudoCount { .. } => "pseudo_count",
            Self::HashCount { .. } => "hash_count",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::MbieEb { beta } | Self::PseudoCount { beta } => counts::check_beta(beta),
            Self::HashCount { beta, bits } => {
                counts::check_beta(beta)?;
                if (1..=64).contains(&bits) {
                    Ok(())
                } else {
                    Err(EbeError::OutOfRange(format!("hash bits {bits} not in 1..=64")))
                }
            }
            _ => Ok(()),
        }
    }
}

/// Sampling distribution `softmax(q / T)` of Boltzmann exploration.
pub fn boltzmann_distribution<F: Scalar>(q: &[F], temperature: F) -> Result<ActionDistribution<F>> {
    if !(temperature > F::zero()) {
        return Err(EbeError::OutOfRange(format!("temperature {temperature} must be positive")));
    }
    let scaled: Vec<F> = q.iter().map(|&v| v / temperature).collect();
    action_distribution(&scaled)
}

/// What a strategy may look at besides the Q-values.
#[derive(Debug, Clone, Copy)]
pub struct StateRef<'a, F> {
    /// Stable identifier of the state, used for exact visit counts.
    pub key: u64,
    /// Feature vector, used by the density and hashing models.
    pub features: &'a [F],
}

/// A strategy together with its count state.
#[derive(Debug, Clone)]
pub struct Strategy<F> {
    kind: StrategyKind<F>,
    visits: VisitCounter,
    densities: Vec<FactoredDensityModel>,
    hashes: Vec<HashCounter<F>>,
    hash_seed: u64,
}

impl<F: Scalar> Strategy<F> {
    pub fn new(kind: StrategyKind<F>) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            visits: VisitCounter::new(),
            densities: Vec::new(),
            hashes: Vec::new(),
            hash_seed: 0,
        })
    }

    /// Seed for the hash-count projection.
    pub fn with_hash_seed(mut self, seed: u64) -> Self {
        self.hash_seed = seed;
        self
    }

    pub fn kind(&self) -> &StrategyKind<F> {
        &self.kind
    }

    pub fn visits(&self) -> &VisitCounter {
        &self.visits
    }

    /// Chooses an action for `q` at training progress `step`.
    pub fn select_action<R: Rng + ?Sized>(
        &mut self,
        q: &[F],
        state: StateRef<'_, F>,
        step: u64,
        rng: &mut R,
    ) -> Result<usize> {
        validate_q(q)?;
        let n = q.len();
        match &self.kind {
            StrategyKind::Greedy => Ok(argmax(q)),
            StrategyKind::Ebe => {
                let h = scaled_entropy(q)?;
                Ok(if explore_decision(h, rng) { rng.random_range(0..n) } else { argmax(q) })
            }
            StrategyKind::EpsilonGreedy(schedule) => {
                let eps = schedule.value(step).to_f64_lossy();
                Ok(if rng.random::<f64>() < eps { rng.random_range(0..n) } else { argmax(q) })
            }
            StrategyKind::Boltzmann(schedule) => {
                Ok(boltzmann_distribution(q, schedule.value(step))?.sample(rng))
            }
            StrategyKind::Ucb => {
                let key = state.key;
                let scores: Vec<F> = (0..n).map(|a| q[a] + ucb_bonus(&self.visits, key, a)).collect();
                let a = argmax(&scores);
                self.visits.record(key, a);
                Ok(a)
            }
            &StrategyKind::MbieEb { beta } => {
                let key = state.key;
                let scores = (0..n)
                    .map(|a| Ok(q[a] + mbie_eb_bonus(&self.visits, key, a, beta)?))
                    .collect::<Result<Vec<F>>>()?;
                let a = argmax(&scores);
                self.visits.record(key, a);
                Ok(a)
            }
            &StrategyKind::PseudoCount { beta } => {
                let x = discretize(state.features, DENSITY_LEVELS);
                if self.densities.is_empty() {
                    self.densities = (0..n)
                        .map(|_| FactoredDensityModel::laplace(x.len(), DENSITY_LEVELS))
                        .collect::<Result<_>>()?;
                }
                let mut scores = Vec::with_capacity(n);
                for (a, model) in self.densities.iter().enumerate() {
                    let count = model.pseudo_count::<F>(&x)?;
                    scores.push(q[a] + count_bonus(beta, count)?);
                }
                let a = argmax(&scores);
                self.densities[a].observe(&x)?;
                self.visits.record(state.key, a);
                Ok(a)
            }
            &StrategyKind::HashCount { beta, bits } => {
                if self.hashes.is_empty() {
                    self.hashes = (0..n)
                        .map(|_| HashCounter::new(bits, state.features.len(), self.hash_seed))
                        .collect::<Result<_>>()?;
                }
                let code = self.hashes[0].code(state.features)?;
                let mut scores = Vec::with_capacity(n);
                for (a, table) in self.hashes.iter().enumerate() {
                    let count = F::from_u64(table.count_code(code)).expect("count fits scalar");
                    scores.push(q[a] + count_bonus(beta, count)?);
                }
                let a = argmax(&scores);
                self.hashes[a].record(state.features)?;
                self.visits.record(state.key, a);
                Ok(a)
            }
        }
    }
}

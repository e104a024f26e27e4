//! Factored categorical density model and the pseudo-count it induces.

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Product of independent per-feature categorical models with additive
/// smoothing.
///
/// Feature `i` with value `v` has probability
/// `(count_i[v] + α) / (n + K_i α)`, and a state's probability is the product
/// over features. `α = 0` gives the empirical model, `α = 1` Laplace.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredDensityModel {
    categories: Vec<usize>,
    counts: Vec<Vec<u64>>,
    total: u64,
    smoothing: f64,
}

impl FactoredDensityModel {
    pub fn new(categories: Vec<usize>, smoothing: f64) -> Result<Self> {
        if categories.is_empty() {
            return Err(EbeError::Empty("density model features"));
        }
        if categories.contains(&0) {
            return Err(EbeError::OutOfRange("every feature needs at least one category".into()));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(EbeError::OutOfRange(format!("smoothing {smoothing} must be >= 0")));
        }
        let counts = categories.iter().map(|&k| vec![0; k]).collect();
        Ok(Self { categories, counts, total: 0, smoothing })
    }

    /// Laplace-smoothed model with `levels` categories per feature.
    pub fn laplace(dim: usize, levels: usize) -> Result<Self> {
        Self::new(vec![levels; dim], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.categories.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn category_count(&self, feature: usize, value: usize) -> u64 {
        self.counts[feature][value]
    }

    fn check(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(EbeError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        for (i, (&v, &k)) in x.iter().zip(&self.categories).enumerate() {
            if v >= k {
                return Err(EbeError::OutOfRange(format!("feature {i} value {v} >= {k} categories")));
            }
        }
        Ok(())
    }

    pub fn observe(&mut self, x: &[usize]) -> Result<()> {
        self.check(x)?;
        for (c, &v) in self.counts.iter_mut().zip(x) {
            c[v] += 1;
        }
        self.total += 1;
        Ok(())
    }

    /// ρ(x): probability of `x` under the current counts.
    pub fn prob<F: Scalar>(&self, x: &[usize]) -> Result<F> {
        self.check(x)?;
        Ok(self.log_terms::<F>(x).0.exp())
    }

    /// ρ′(x): probability of `x` after one more observation of `x`.
    pub fn prob_after<F: Scalar>(&self, x: &[usize]) -> Result<F> {
        self.check(x)?;
        let (log_rho, gain, _) = self.log_terms::<F>(x);
        Ok((log_rho + gain).exp())
    }

    /// Returns `(ln ρ, ln ρ′ − ln ρ, any_zero_factor)`.
    fn log_terms<F: Scalar>(&self, x: &[usize]) -> (F, F, bool) {
        let alpha = F::lit(self.smoothing);
        let n = F::from_u64(self.total).expect("count fits scalar");
        let mut log_rho = F::zero();
        let mut gain = F::zero();
        let mut zero = false;
        for ((counts, &k), &v) in self.counts.iter().zip(&self.categories).zip(x) {
            let a = F::from_u64(counts[v]).expect("count fits scalar") + alpha;
            let b = n + F::from_usize(k).expect("category count fits scalar") * alpha;
            if a <= F::zero() {
                zero = true;
                log_rho = F::neg_infinity();
                continue;
            }
            log_rho += (a / b).ln();
            gain += (F::one() / a).ln_1p() - (F::one() / b).ln_1p();
        }
        (log_rho, gain, zero)
    }

    /// Pseudo-count `ρ(1 − ρ′) / (ρ′ − ρ)` of `x`.
    ///
    /// Evaluated as `−expm1(ln ρ′) / expm1(ln ρ′ − ln ρ)`, which is the same
    /// ratio without the cancellation in `ρ′ − ρ`. Returns 0 when the model
    /// does not gain probability on `x`, except when `x` already has
    /// probability one: then every observation was `x` and the count is `n`.
    pub fn pseudo_count<F: Scalar>(&self, x: &[usize]) -> Result<F> {
        self.check(x)?;
        if self.total == 0 {
            return Ok(F::zero());
        }
        let (log_rho, gain, zero) = self.log_terms::<F>(x);
        if zero {
            return Ok(F::zero());
        }
        if gain <= F::zero() {
            return Ok(if log_rho == F::zero() {
                F::from_u64(self.total).expect("count fits scalar")
            } else {
                F::zero()
            });
        }
        let log_after = log_rho + gain;
        Ok(-log_after.exp_m1() / gain.exp_m1())
    }
}

/// Maps real features onto category indices by rounding and clamping.
pub fn discretize<F: Scalar>(features: &[F], levels: usize) -> Vec<usize> {
    let top = levels.saturating_sub(1) as f64;
    features
        .iter()
        .map(|v| v.to_f64_lossy().round().clamp(0.0, top) as usize)
        .collect()
}

//! Entropy-based exploration numerics.
//!
//! Q-values of a state are turned into a softmax action distribution (with
//! the maximum subtracted before exponentiation), whose Shannon entropy is
//! normalised by `ln |A|` so that it lies in `[0, 1]`. An agent explores in a
//! state with probability equal to that scaled entropy.

use rand::Rng;

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Probability vector over the discrete actions of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution<F> {
    probs: Vec<F>,
}

impl<F: Scalar> ActionDistribution<F> {
    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Draws an index with probability `probs[i]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = F::lit(rng.random::<f64>());
        let mut acc = F::zero();
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn into_inner(self) -> Vec<F> {
        self.probs
    }
}

/// Normalised state entropy, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScaledEntropy<F>(F);

impl<F: Scalar> ScaledEntropy<F> {
    /// Wraps a value, rejecting anything outside `[0, 1]`.
    pub fn new(value: F) -> Result<Self> {
        if value >= F::zero() && value <= F::one() {
            Ok(Self(value))
        } else {
            Err(EbeError::OutOfRange(format!("scaled entropy {value} not in [0, 1]")))
        }
    }

    pub fn value(self) -> F {
        self.0
    }
}

/// Checks that a Q-vector is non-empty and finite.
pub fn validate_q<F: Scalar>(q: &[F]) -> Result<()> {
    if q.is_empty() {
        return Err(EbeError::Empty("q-values"));
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(EbeError::NonFinite(format!("q-values[{i}] = {}", q[i])));
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
///
/// Panics on an empty slice.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> usize {
    assert!(!values.is_empty(), "argmax of an empty slice");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn max_of<F: Scalar>(q: &[F]) -> F {
    q.iter().copied().fold(F::neg_infinity(), F::max)
}

/// Softmax of `q` computed with the max trick.
pub fn action_distribution<F: Scalar>(q: &[F]) -> Result<ActionDistribution<F>> {
    validate_q(q)?;
    let m = max_of(q);
    let mut probs: Vec<F> = q.iter().map(|&v| (v - m).exp()).collect();
    let z: F = probs.iter().copied().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(ActionDistribution { probs })
}

/// `-Σ p(a) log_{|A|} p(a)` of the softmax of `q`, clamped to `[0, 1]`.
///
/// A single action has nothing to explore and yields 0.
pub fn scaled_entropy<F: Scalar>(q: &[F]) -> Result<ScaledEntropy<F>> {
    validate_q(q)?;
    if q.len() == 1 {
        return Ok(ScaledEntropy(F::zero()));
    }
    // Work with log-probabilities directly: ln p(a) = (q[a] - m) - ln Z.
    let m = max_of(q);
    let shifted: Vec<F> = q.iter().map(|&v| v - m).collect();
    let z: F = shifted.iter().map(|&s| s.exp()).sum();
    let log_z = z.ln();
    let mut h = F::zero();
    for &s in &shifted {
        let log_p = s - log_z;
        let p = log_p.exp();
        if p > F::zero() {
            h -= p * log_p;
        }
    }
    let n = F::from_usize(q.len()).expect("action count fits the scalar type");
    let h = (h / n.ln()).max(F::zero()).min(F::one());
    Ok(ScaledEntropy(h))
}

/// Returns `true` (explore) with probability `h`.
pub fn explore_decision<F: Scalar, R: Rng + ?Sized>(h: ScaledEntropy<F>, rng: &mut R) -> bool {
    rng.random::<f64>() < h.value().to_f64_lossy()
}

/// Mean of the per-step scaled entropies of one episode.
pub fn mean_episode_entropy<F: Scalar>(entropies: &[ScaledEntropy<F>]) -> Result<F> {
    if entropies.is_empty() {
        return Err(EbeError::Empty("episode entropies"));
    }
    let sum: F = entropies.iter().map(|h| h.value()).sum();
    let n = F::from_usize(entropies.len()).expect("episode length fits the scalar type");
    Ok((sum / n).max(F::zero()).min(F::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_q_gives_uniform_distribution() {
        for c in [-3.5, 0.0, 17.0, 1e6] {
            let d = action_distribution(&[c, c, c]).unwrap();
            for &p in d.probs() {
                assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn two_action_softmax_matches_closed_form() {
        // e / (1 + e) and 1 / (1 + e)
        let d = action_distribution(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.7310585786300049, epsilon = 1e-12);
        assert_abs_diff_eq!(d.probs()[1], 0.2689414213699951, epsilon = 1e-12);
    }

    #[test]
    fn huge_gap_does_not_overflow() {
        let d = action_distribution(&[1000.0_f64, 0.0]).unwrap();
        assert!(d.probs().iter().all(|p| p.is_finite()));
        assert!(d.probs()[0] >= 1.0 - 1e-300);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(action_distribution::<f64>(&[]).is_err());
        assert!(action_distribution(&[0.0, f64::NAN]).is_err());
        assert!(scaled_entropy(&[f64::INFINITY, 0.0]).is_err());
        assert!(scaled_entropy::<f64>(&[]).is_err());
    }

    #[test]
    fn entropy_reference_values() {
        assert_abs_diff_eq!(scaled_entropy(&[0.3, 0.3, 0.3, 0.3]).unwrap().value(), 1.0, epsilon = 1e-12);
        // binary entropy (base 2) of softmax([1, 0])
        assert_abs_diff_eq!(scaled_entropy(&[1.0, 0.0]).unwrap().value(), 0.8399415379831693, epsilon = 1e-12);
        // p2 = 1 / (1 + e^20)
        let h = scaled_entropy(&[20.0, 0.0]).unwrap().value();
        assert!(h < 1e-6);
        assert_abs_diff_eq!(h, 6.244593812256063e-08, epsilon = 1e-15);
    }

    #[test]
    fn single_action_has_zero_entropy() {
        assert_eq!(scaled_entropy(&[4.2]).unwrap().value(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let h = scaled_entropy(&[1.0_f32, 0.0]).unwrap().value();
        assert!((h - 0.83994156).abs() < 1e-5);
    }

    #[test]
    fn explore_decision_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero = ScaledEntropy::new(0.0).unwrap();
        let one = ScaledEntropy::new(1.0).unwrap();
        for _ in 0..10_000 {
            assert!(!explore_decision(zero, &mut rng));
            assert!(explore_decision(one, &mut rng));
        }
    }

    #[test]
    fn explore_decision_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let h = ScaledEntropy::new(0.5).unwrap();
        let n = 1_000_000;
        let hits = (0..n).filter(|_| explore_decision(h, &mut rng)).count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.002, "rate {rate}");
    }

    #[test]
    fn mean_episode_entropy_cases() {
        let hs = |v: &[f64]| v.iter().map(|&x| ScaledEntropy::new(x).unwrap()).collect::<Vec<_>>();
        assert_eq!(mean_episode_entropy(&hs(&[0.5, 0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(mean_episode_entropy(&hs(&[0.0, 1.0])).unwrap(), 0.5);
        assert!(mean_episode_entropy::<f64>(&[]).is_err());
    }

    #[test]
    fn scaled_entropy_new_rejects_out_of_range() {
        assert!(ScaledEntropy::new(1.5).is_err());
        assert!(ScaledEntropy::new(-0.1).is_err());
    }

    #[test]
    fn concentration_is_monotone_in_gap() {
        let gaps = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0];
        for len in 2..6 {
            let hs: Vec<f64> = gaps
                .iter()
                .map(|&g| {
                    let mut q = vec![0.0; len];
                    q[0] = g;
                    scaled_entropy(&q).unwrap().value()
                })
                .collect();
            assert!(hs.windows(2).all(|w| w[1] < w[0]), "{hs:?}");
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    proptest! {
        #[test]
        fn shift_invariance(q in prop::collection::vec(-50.0..50.0f64, 1..32), c in -1e3..1e3f64) {
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let a = scaled_entropy(&q).unwrap().value();
            let b = scaled_entropy(&shifted).unwrap().value();
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn entropy_in_unit_interval(q in prop::collection::vec(-1e6..1e6f64, 1..64)) {
            let h = scaled_entropy(&q).unwrap().value();
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn max_trick_matches_naive_softmax(q in prop::collection::vec(-10.0..10.0f64, 1..16)) {
            let d = action_distribution(&q).unwrap();
            let z: f64 = q.iter().map(|v| v.exp()).sum();
            for (p, v) in d.probs().iter().zip(&q) {
                prop_assert!((p - v.exp() / z).abs() <= 1e-12);
            }
            let total: f64 = d.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(d.probs().iter().all(|&p| p > 0.0));
        }

        #[test]
        fn argmax_is_preserved(q in prop::collection::vec(-100.0..100.0f64, 1..16)) {
            let d = action_distribution(&q).unwrap();
            prop_assert_eq!(argmax(d.probs()), argmax(&q));
        }
    }
}

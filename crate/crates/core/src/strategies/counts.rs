use std::collections::HashMap;

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Bonus assigned to a never-tried pair; large enough to beat any finite Q.
pub const UNTRIED_BONUS: f64 = 1e9;

/// Offset added to a (pseudo-)count before taking its inverse square root.
pub const COUNT_OFFSET: f64 = 0.01;

/// Visit counts `N(s, a)` and the total number of recorded steps `t`.
#[derive(Debug, Clone, Default)]
pub struct VisitCounter {
    counts: HashMap<(u64, usize), u64>,
    total: u64,
}

impl VisitCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, state: u64, action: usize) {
        *self.counts.entry((state, action)).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn count(&self, state: u64, action: usize) -> u64 {
        self.counts.get(&(state, action)).copied().unwrap_or(0)
    }

    pub fn total_steps(&self) -> u64 {
        self.total
    }
}

/// `sqrt(2 ln t / N(s, a))`; [`UNTRIED_BONUS`] when the pair is unvisited.
pub fn ucb_bonus<F: Scalar>(counter: &VisitCounter, state: u64, action: usize) -> F {
    let n = counter.count(state, action);
    if n == 0 {
        return F::lit(UNTRIED_BONUS);
    }
    let t = F::from_u64(counter.total_steps().max(1)).expect("step count fits scalar");
    ucb_term(t, F::from_u64(n).expect("count fits scalar"))
}

fn ucb_term<F: Scalar>(t: F, n: F) -> F {
    (F::lit(2.0) * t.ln() / n).sqrt()
}

/// `β / sqrt(N(s, a))`; [`UNTRIED_BONUS`] when the pair is unvisited.
pub fn mbie_eb_bonus<F: Scalar>(counter: &VisitCounter, state: u64, action: usize, beta: F) -> Result<F> {
    check_beta(beta)?;
    let n = counter.count(state, action);
    if n == 0 {
        return Ok(F::lit(UNTRIED_BONUS));
    }
    Ok(beta / F::from_u64(n).expect("count fits scalar").sqrt())
}

/// `β / sqrt(count + 0.01)`, shared by the pseudo-count and hash-count bonuses.
pub fn count_bonus<F: Scalar>(beta: F, count: F) -> Result<F> {
    check_beta(beta)?;
    if !(count >= F::zero()) {
        return Err(EbeError::OutOfRange(format!("count {count} must be non-negative")));
    }
    Ok(beta / (count + F::lit(COUNT_OFFSET)).sqrt())
}

pub(crate) fn check_beta<F: Scalar>(beta: F) -> Result<()> {
    if beta > F::zero() && beta.is_finite() {
        Ok(())
    } else {
        Err(EbeError::OutOfRange(format!("beta {beta} must be positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter_with(state: u64, action: usize, visits: u64, extra: u64) -> VisitCounter {
        let mut c = VisitCounter::new();
        for _ in 0..visits {
            c.record(state, action);
        }
        for _ in 0..extra {
            c.record(state + 1, action);
        }
        c
    }

    #[test]
    fn ucb_reference_values() {
        let e = std::f64::consts::E;
        assert!((ucb_term(e, 2.0) - 1.0).abs() < 1e-15);
        assert!((ucb_term(e, 8.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ucb_reads_counter() {
        let c = counter_with(0, 0, 2, 6);
        let b: f64 = ucb_bonus(&c, 0, 0);
        assert!((b - (2.0 * 8f64.ln() / 2.0).sqrt()).abs() < 1e-15);

        let c8 = counter_with(0, 0, 8, 0);
        let b8: f64 = ucb_bonus(&c8, 0, 0);
        assert!((b8 - (2.0 * 8f64.ln() / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn untried_sentinel_dominates() {
        let c = VisitCounter::new();
        let b: f64 = ucb_bonus(&c, 3, 1);
        assert_eq!(b, UNTRIED_BONUS);
        assert!(b > 1e6);
        assert_eq!(mbie_eb_bonus(&c, 3, 1, 0.5).unwrap(), UNTRIED_BONUS);
    }

    #[test]
    fn mbie_reference_values() {
        let c = counter_with(7, 1, 4, 0);
        assert_eq!(mbie_eb_bonus(&c, 7, 1, 100.0).unwrap(), 50.0);
        let c = counter_with(7, 1, 1, 0);
        assert_eq!(mbie_eb_bonus(&c, 7, 1, 1.0).unwrap(), 1.0);
        assert!(mbie_eb_bonus(&c, 7, 1, 0.0).is_err());
        assert!(mbie_eb_bonus(&c, 7, 1, -1.0).is_err());
    }

    #[test]
    fn mbie_decreases_with_visits() {
        let mut c = VisitCounter::new();
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            c.record(0, 0);
            let b = mbie_eb_bonus(&c, 0, 0, 2.0).unwrap();
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn count_bonus_reference_values() {
        assert!((count_bonus(1.0_f64, 0.99).unwrap() - 1.0).abs() < 1e-15);
        assert!((count_bonus(1.0_f64, 0.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(count_bonus(0.0, 1.0).is_err());
        let mut last = f64::INFINITY;
        let mut n = 1.0;
        for _ in 0..20 {
            let b = count_bonus(1.0, n).unwrap();
            assert!(b < last);
            last = b;
            n *= 2.0;
        }
    }

    #[test]
    fn total_steps_is_sum_of_increments() {
        let mut c = VisitCounter::new();
        c.record(0, 0);
        c.record(0, 1);
        c.record(5, 0);
        c.record(0, 0);
        assert_eq!(c.total_steps(), 4);
        assert_eq!(c.count(0, 0) + c.count(0, 1) + c.count(5, 0), 4);
    }
}

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Piecewise-linear annealing: `start` up to `begin`, `end` from `end_step`
/// on, linear in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule<F> {
    start: F,
    end: F,
    begin: u64,
    end_step: u64,
}

impl<F: Scalar> LinearSchedule<F> {
    pub fn new(start: F, end: F, begin: u64, end_step: u64) -> Result<Self> {
        if begin > end_step {
            return Err(EbeError::OutOfRange(format!(
                "schedule begin {begin} is after end {end_step}"
            )));
        }
        if !start.is_finite() || !end.is_finite() {
            return Err(EbeError::NonFinite("schedule endpoint".into()));
        }
        Ok(Self { start, end, begin, end_step })
    }

    /// Constant schedule.
    pub fn constant(value: F) -> Self {
        Self { start: value, end: value, begin: 0, end_step: 0 }
    }

    pub fn start(&self) -> F {
        self.start
    }

    pub fn end(&self) -> F {
        self.end
    }

    pub fn begin_step(&self) -> u64 {
        self.begin
    }

    pub fn end_step(&self) -> u64 {
        self.end_step
    }

    pub fn value(&self, t: u64) -> F {
        if t >= self.end_step {
            self.end
        } else if t <= self.begin {
            self.start
        } else {
            let num = F::from_u64(t - self.begin).expect("step fits scalar");
            let den = F::from_u64(self.end_step - self.begin).expect("step fits scalar");
            self.start + (self.end - self.start) * num / den
        }
    }

    /// Scales the step boundaries, e.g. to turn epochs into environment steps.
    pub fn rescaled(&self, factor: u64) -> Self {
        Self {
            begin: self.begin * factor,
            end_step: self.end_step * factor,
            ..*self
        }
    }
}

/// The three ε-greedy baselines used on the long-horizon benchmarks.
///
/// * `I`: 1.0 for the first 100 units, annealed to 0.01 by unit 600, then 0.01.
/// * `II`: annealed from 1.0 to 0.01 over the whole run.
/// * `III`: 1.0 for the first 100 units, then annealed to 0.01 by the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonVariant {
    I,
    II,
    III,
}

impl EpsilonVariant {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "I" | "i" | "1" => Some(Self::I),
            "II" | "ii" | "2" => Some(Self::II),
            "III" | "iii" | "3" => Some(Self::III),
            _ => None,
        }
    }

    /// Schedule over a run of `total` units (episodes or epochs).
    pub fn schedule<F: Scalar>(self, total: u64) -> LinearSchedule<F> {
        let (start, end) = (F::one(), F::lit(0.01));
        let (begin, end_step) = match self {
            Self::I => (100, 600),
            Self::II => (0, total),
            Self::III => (100.min(total), total),
        };
        LinearSchedule { start, end, begin, end_step }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let s = LinearSchedule::new(0.8, 0.1, 10, 199).unwrap();
        assert_eq!(s.value(0), 0.8);
        assert_eq!(s.value(10), 0.8);
        assert_eq!(s.value(199), 0.1);
        assert_eq!(s.value(10_000), 0.1);
    }

    #[test]
    fn linear_in_between() {
        let s = LinearSchedule::new(1.0_f64, 0.0, 0, 100).unwrap();
        assert!((s.value(25) - 0.75).abs() < 1e-15);
        assert!((s.value(50) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(LinearSchedule::new(1.0, 0.0, 5, 4).is_err());
    }

    #[test]
    fn variants_follow_table() {
        let one: LinearSchedule<f64> = EpsilonVariant::I.schedule(1000);
        assert_eq!(one.value(50), 1.0);
        assert_eq!(one.value(600), 0.01);
        assert_eq!(one.value(900), 0.01);
        assert!((one.value(350) - 0.505).abs() < 1e-12);

        let two: LinearSchedule<f64> = EpsilonVariant::II.schedule(1000);
        assert_eq!(two.value(0), 1.0);
        assert_eq!(two.value(1000), 0.01);

        let three: LinearSchedule<f64> = EpsilonVariant::III.schedule(1000);
        assert_eq!(three.value(100), 1.0);
        assert!(three.value(101) < 1.0);
        assert_eq!(three.value(1000), 0.01);
    }

    #[test]
    fn rescale_multiplies_boundaries() {
        let s: LinearSchedule<f64> = EpsilonVariant::I.schedule(1000).rescaled(5000);
        assert_eq!(s.begin_step(), 500_000);
        assert_eq!(s.end_step(), 3_000_000);
    }
}

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

/// Counts states by the sign pattern of a fixed Gaussian random projection.
#[derive(Debug, Clone)]
pub struct HashCounter<F> {
    bits: usize,
    dim: usize,
    projection: Vec<F>,
    table: HashMap<u64, u64>,
}

impl<F: Scalar> HashCounter<F> {
    /// `bits` must be in `1..=64`; the projection is drawn from `seed`.
    pub fn new(bits: usize, dim: usize, seed: u64) -> Result<Self> {
        if !(1..=64).contains(&bits) {
            return Err(EbeError::OutOfRange(format!("hash bits {bits} not in 1..=64")));
        }
        if dim == 0 {
            return Err(EbeError::Empty("hash input dimension"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..bits * dim)
            .map(|_| F::lit(StandardNormal.sample(&mut rng)))
            .collect();
        Ok(Self { bits, dim, projection, table: HashMap::new() })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Bit `i` is set when row `i` of the projection has a positive dot
    /// product with `state`.
    pub fn code(&self, state: &[F]) -> Result<u64> {
        if state.len() != self.dim {
            return Err(EbeError::DimensionMismatch { expected: self.dim, got: state.len() });
        }
        let mut code = 0u64;
        for (bit, row) in self.projection.chunks_exact(self.dim).enumerate() {
            let dot: F = row.iter().zip(state).map(|(&w, &x)| w * x).sum();
            if dot > F::zero() {
                code |= 1 << bit;
            }
        }
        Ok(code)
    }

    pub fn count(&self, state: &[F]) -> Result<u64> {
        Ok(self.count_code(self.code(state)?))
    }

    pub fn count_code(&self, code: u64) -> u64 {
        self.table.get(&code).copied().unwrap_or(0)
    }

    pub fn record(&mut self, state: &[F]) -> Result<u64> {
        let code = self.code(state)?;
        let slot = self.table.entry(code).or_insert(0);
        *slot += 1;
        Ok(*slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_state_accumulates() {
        let mut h = HashCounter::<f64>::new(16, 4, 9).unwrap();
        let s = [0.3, -1.0, 2.0, 0.0];
        for _ in 0..5 {
            h.record(&s).unwrap();
        }
        assert_eq!(h.count(&s).unwrap(), 5);
    }

    #[test]
    fn codes_depend_only_on_seed() {
        let a = HashCounter::<f64>::new(16, 3, 42).unwrap();
        let b = HashCounter::<f64>::new(16, 3, 42).unwrap();
        for s in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [3.0, 3.0, -3.0]] {
            assert_eq!(a.code(&s).unwrap(), b.code(&s).unwrap());
        }
        assert_eq!(a.code(&[0.0; 3]).unwrap(), 0);
    }

    #[test]
    fn positive_scaling_preserves_code() {
        let h = HashCounter::<f64>::new(16, 5, 1).unwrap();
        let x = [0.5, -1.5, 2.0, 0.25, -0.75];
        let x2: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
        assert_eq!(h.code(&x).unwrap(), h.code(&x2).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = HashCounter::<f64>::new(8, 3, 0).unwrap();
        assert!(h.code(&[1.0, 2.0]).is_err());
        assert!(HashCounter::<f64>::new(0, 3, 0).is_err());
        assert!(HashCounter::<f64>::new(65, 3, 0).is_err());
    }
}

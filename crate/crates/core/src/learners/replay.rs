use rand::Rng;

use super::tabular::Transition;
use crate::error::{EbeError, Result};

/// Fixed-capacity ring buffer of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
}

/// Transition over feature-vector observations.
pub type VecTransition<F> = Transition<Vec<F>, F>;

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(EbeError::Empty("replay capacity"));
        }
        Ok(Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, cursor: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Inserts `item`, overwriting the oldest entry once full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored items from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `batch` items drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&T>> {
        if batch == 0 {
            return Err(EbeError::Empty("replay batch"));
        }
        if self.items.len() < batch {
            return Err(EbeError::InsufficientSamples { have: self.items.len(), need: batch });
        }
        Ok((0..batch).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn keeps_most_recent_after_wraparound() {
        let mut buf = ReplayBuffer::new(5).unwrap();
        for i in 0..13 {
            buf.push(i);
        }
        assert_eq!(buf.len(), 5);
        assert_eq!(buf.iter_ordered().copied().collect::<Vec<_>>(), vec![8, 9, 10, 11, 12]);
    }

    #[test]
    fn refuses_undersized_sampling() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(2, &mut rng), Err(EbeError::InsufficientSamples { have: 1, need: 2 })));
        assert!(buf.sample(0, &mut rng).is_err());
        assert_eq!(buf.sample(1, &mut rng).unwrap(), vec![&1]);
        assert!(ReplayBuffer::<u8>::new(0).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        for i in 0..4usize {
            buf.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = [0usize; 4];
        for _ in 0..25_000 {
            for &&i in &buf.sample(4, &mut rng).unwrap() {
                hits[i] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / 100_000.0 - 0.25).abs() < 0.01);
        }
    }
}

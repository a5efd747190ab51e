//! Fixed-capacity experience replay with FIFO eviction.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Transition with the observation already normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredTransition {
    pub state: [f64; 9],
    pub action: u8,
    pub reward: f64,
    pub next_state: [f64; 9],
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<StoredTransition>,
    /// Slot the next push overwrites once full.
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { capacity, items: Vec::new(), head: 0, pushed: 0 })
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

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: StoredTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.pushed += 1;
    }

    pub fn get(&self, i: usize) -> Option<&StoredTransition> {
        self.items.get(i)
    }

    /// Oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &StoredTransition> {
        let (a, b) = self.items.split_at(self.head);
        b.iter().chain(a.iter())
    }

    /// Uniform sample of `batch` distinct entries.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&StoredTransition>> {
        if batch > self.items.len() {
            return Err(invalid("batch larger than buffer contents"));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    fn t(r: f64) -> StoredTransition {
        StoredTransition { state: [0.0; 9], action: 0, reward: r, next_state: [0.0; 9], terminal: false }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let order: Vec<f64> = b.iter_fifo().map(|x| x.reward).collect();
        assert_eq!(order, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.total_pushed(), 5);
    }

    #[test]
    fn samples_without_replacement() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..50 {
            b.push(t(i as f64));
        }
        let mut rng = stream_rng(3, 3);
        let s = b.sample(50, &mut rng).unwrap();
        let mut r: Vec<i64> = s.iter().map(|x| x.reward as i64).collect();
        r.sort();
        assert_eq!(r, (0..50).collect::<Vec<_>>());
        assert!(b.sample(51, &mut rng).is_err());
    }
}

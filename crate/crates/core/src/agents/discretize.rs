//! Maps the continuous observation onto a small integer state key.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::Observation;

pub type StateKey = [u8; 9];

/// Upper-exclusive bin edges per observation dimension. A value below the
/// first edge falls in bin 0, a value at or above the last edge in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub edges: [Vec<f64>; 9],
}

impl Discretizer {
    pub fn new(edges: [Vec<f64>; 9]) -> Result<Self> {
        for e in &edges {
            if e.len() > 254 || e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("bin edges must be finite and strictly increasing"));
            }
        }
        Ok(Discretizer { edges })
    }

    /// Default binning for a pool capped at `n_max` workers.
    pub fn standard(n_max: u32) -> Self {
        let queue = vec![1.0, 11.0, 41.0, 101.0];
        let mut workers = Vec::new();
        let mut w = 4;
        while w <= n_max.max(4) {
            workers.push(w as f64);
            w += 4;
        }
        Discretizer {
            edges: [
                queue.clone(),
                queue.clone(),
                queue.clone(),
                queue,
                workers,
                vec![0.75, 1.25, 1.75],
                vec![0.5, 1.5, 2.5],
                vec![2.5, 5.0, 7.5],
                vec![0.5, 0.9],
            ],
        }
    }

    pub fn bins(&self, dim: usize) -> usize {
        self.edges[dim].len() + 1
    }

    pub fn state_count(&self) -> usize {
        (0..9).map(|d| self.bins(d)).product()
    }

    pub fn bin(&self, dim: usize, value: f64) -> u8 {
        // NaN lands in bin 0 since every comparison is false.
        self.edges[dim].iter().take_while(|&&e| value >= e).count() as u8
    }

    pub fn key(&self, obs: &Observation) -> StateKey {
        let raw = obs.to_array();
        let mut k = [0u8; 9];
        for d in 0..9 {
            k[d] = self.bin(d, raw[d]);
        }
        k
    }
}

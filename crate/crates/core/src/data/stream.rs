use rand::seq::SliceRandom;

use super::Dataset;
use crate::model::Sample;
use crate::rng::{derive_rng, Purpose};

/// Endless epoch-by-epoch batch iterator. Every epoch is a fresh permutation
/// derived from `(seed, epoch)`; the last batch of an epoch may be short.
#[derive(Clone, Debug)]
pub struct BatchStream {
    order: Vec<usize>,
    batch_size: usize,
    seed: u64,
    epoch: usize,
    pos: usize,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        assert!(n > 0, "BatchStream over empty dataset");
        assert!(batch_size > 0, "batch size must be positive");
        let mut s = BatchStream {
            order: (0..n).collect(),
            batch_size,
            seed,
            epoch: 1,
            pos: 0,
        };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        self.order.sort_unstable();
        let mut rng = derive_rng(self.seed, Purpose::Shuffle, self.epoch as u32);
        self.order.shuffle(&mut rng);
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Indices of the next batch and the 1-based epoch it belongs to.
    pub fn next_indices(&mut self) -> (usize, &[usize]) {
        if self.pos >= self.order.len() {
            self.epoch += 1;
            self.pos = 0;
            self.shuffle();
        }
        let start = self.pos;
        let end = (start + self.batch_size).min(self.order.len());
        self.pos = end;
        (self.epoch, &self.order[start..end])
    }

    pub fn next_batch<'a>(&mut self, ds: &'a Dataset) -> (usize, Vec<&'a Sample>) {
        assert_eq!(ds.len(), self.order.len(), "stream built for a different dataset size");
        let (epoch, idx) = self.next_indices();
        (epoch, idx.iter().map(|&i| &ds.samples[i]).collect())
    }
}

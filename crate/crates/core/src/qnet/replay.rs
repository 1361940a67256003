use std::collections::VecDeque;

use rand::Rng;

use crate::error::QNetError;

/// One transition `(s, a, r, s', done)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only when `next_state` is terminal; time-limit cut-offs bootstrap.
    pub done: bool,
}

/// Bounded FIFO of transitions; the oldest entry is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, QNetError> {
        if capacity == 0 {
            return Err(QNetError::Invalid(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
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

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.items.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Distinct positions drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, QNetError> {
        if batch_size == 0 {
            return Err(QNetError::EmptyBatch);
        }
        if batch_size > self.items.len() {
            return Err(QNetError::Underfilled {
                available: self.items.len(),
                requested: batch_size,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch_size).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Experience>, QNetError> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

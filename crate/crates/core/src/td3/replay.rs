//! Uniform-sampling ring replay buffer.

use rand::Rng;

/// One stored transition. Actions are kept in the normalized `[-1, 1]`
/// space the networks operate in. `done` is false for timeout cutoffs so
/// their values still bootstrap.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { data: Vec::new(), capacity, next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Uniform sample with replacement.
    pub fn sample_indices(&self, rng: &mut impl Rng, n: usize) -> Vec<usize> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.data.len())).collect()
    }
}

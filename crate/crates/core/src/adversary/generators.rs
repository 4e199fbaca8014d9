use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Adversary, Round};
use crate::sketches::{StreamModel, StreamUpdate};

/// Replays a fixed stream, ignoring the algorithm's answers.
#[derive(Debug, Clone)]
pub struct ReplayAdversary {
    updates: Vec<StreamUpdate>,
    next: usize,
    model: StreamModel,
}

impl ReplayAdversary {
    pub fn new(updates: Vec<StreamUpdate>) -> Self {
        Self::with_model(updates, StreamModel::Turnstile)
    }

    pub fn with_model(updates: Vec<StreamUpdate>, model: StreamModel) -> Self {
        Self { updates, next: 0, model }
    }
}

impl<T> Adversary<T> for ReplayAdversary {
    fn model(&self) -> StreamModel {
        self.model
    }

    fn next_update(&mut self, _history: &[Round<T>]) -> Option<StreamUpdate> {
        let u = self.updates.get(self.next).copied();
        self.next += 1;
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomModel {
    /// Every update is `(uniform item, +1)`.
    InsertionOnly,
    /// Uniform item; weight `-1` with probability `deletion_prob`, else `+1`.
    Turnstile { deletion_prob: f64 },
}

/// Oblivious baseline: uniformly random items from `[1, n]`.
#[derive(Debug, Clone)]
pub struct RandomStreamAdversary {
    model: RandomModel,
    n: u64,
    remaining: usize,
    rng: ChaCha8Rng,
}

impl RandomStreamAdversary {
    pub fn new(model: RandomModel, n: u64, m: usize, seed: u64) -> Self {
        Self { model, n, remaining: m, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn draw(&mut self) -> Option<StreamUpdate> {
        if self.remaining == 0 || self.n == 0 {
            return None;
        }
        self.remaining -= 1;
        let item = self.rng.gen_range(1..=self.n);
        let weight = match self.model {
            RandomModel::InsertionOnly => 1,
            RandomModel::Turnstile { deletion_prob } => {
                if self.rng.gen_bool(deletion_prob.clamp(0.0, 1.0)) {
                    -1
                } else {
                    1
                }
            }
        };
        Some(StreamUpdate { item, weight })
    }
}

impl<T> Adversary<T> for RandomStreamAdversary {
    fn model(&self) -> StreamModel {
        match self.model {
            RandomModel::InsertionOnly => StreamModel::InsertionOnly,
            RandomModel::Turnstile { .. } => StreamModel::UnitTurnstile,
        }
    }

    fn next_update(&mut self, _history: &[Round<T>]) -> Option<StreamUpdate> {
        self.draw()
    }
}

/// The full stream a [`RandomStreamAdversary`] would play.
pub fn random_stream(model: RandomModel, n: u64, m: usize, seed: u64) -> Vec<StreamUpdate> {
    let mut adv = RandomStreamAdversary::new(model, n, m, seed);
    std::iter::from_fn(|| adv.draw()).collect()
}

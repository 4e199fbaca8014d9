use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Adversary, Round};
use crate::sketches::{FrequencyVector, StreamModel, StreamUpdate};
use crate::Real;

/// Adaptive insertion-only attack on linear F2 sketches.
///
/// After inserting `probe_batch` distinct items once each, the attack walks a
/// seeded permutation of the domain. It inserts the current candidate and
/// compares the answer with the true F2 of its own stream: when the ratio
/// estimate/truth went down, the candidate is one the sketch undercounts and
/// it is inserted again; otherwise the walk moves to the next candidate.
/// Repeating this drives the estimate far below the true value.
#[derive(Debug, Clone)]
pub struct F2ProbeAttack {
    n: u64,
    m: usize,
    probe_batch: usize,
    order: Vec<u64>,
    cursor: usize,
    emitted: usize,
    frequencies: FrequencyVector,
    reference: (f64, f64),
}

impl F2ProbeAttack {
    pub fn new(n: u64, m: usize, probe_batch: usize, seed: u64) -> Self {
        let mut order: Vec<u64> = (1..=n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            n,
            m,
            probe_batch,
            order,
            cursor: 0,
            emitted: 0,
            frequencies: FrequencyVector::new(n),
            reference: (0.0, 0.0),
        }
    }

    /// Candidates abandoned so far.
    pub fn candidates_skipped(&self) -> usize {
        self.cursor
    }
}

impl<T: Real> Adversary<T> for F2ProbeAttack {
    fn model(&self) -> StreamModel {
        StreamModel::InsertionOnly
    }

    fn next_update(&mut self, history: &[Round<T>]) -> Option<StreamUpdate> {
        if self.emitted >= self.m || self.n == 0 {
            return None;
        }
        let observed = history.last().map_or(0.0, |r| r.output.to_f64_lossy());
        let truth = self.frequencies.f2() as f64;
        if self.emitted > self.probe_batch {
            let (before_estimate, before_truth) = self.reference;
            // cross-multiplied ratio test; a NaN answer counts as "no drop"
            if !(observed * before_truth < before_estimate * truth) {
                self.cursor += 1;
            }
        }
        self.reference = (observed, truth);
        let item = if self.emitted < self.probe_batch {
            (self.emitted as u64 % self.n) + 1
        } else {
            self.order[self.cursor % self.order.len()]
        };
        self.emitted += 1;
        let update = StreamUpdate::insert(item);
        self.frequencies.apply(update).expect("item drawn from the domain");
        Some(update)
    }
}

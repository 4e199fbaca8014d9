use std::collections::BTreeSet;
use std::marker::PhantomData;

use super::hash::{derive_seed, splitmix64};
use super::{ObliviousSketch, SketchError, StreamUpdate};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmvParams {
    /// Number of minimum hash values retained.
    pub capacity: usize,
    pub domain: u64,
}

impl KmvParams {
    /// Capacity `ceil(4 / accuracy^2)`, at least 2.
    pub fn for_accuracy(accuracy: f64, domain: u64) -> Result<Self, SketchError> {
        if !(accuracy > 0.0 && accuracy.is_finite()) {
            return Err(SketchError::Parameter { name: "accuracy", value: accuracy });
        }
        let capacity = ((4.0 / (accuracy * accuracy)).ceil() as usize).max(2);
        Ok(Self { capacity, domain })
    }
}

/// K-minimum-values distinct-elements sketch.
///
/// Keeps the `capacity` smallest hash values seen. Below capacity the count is
/// exact; at capacity the estimate is `(k - 1) / h_k` with `h_k` the largest
/// retained hash normalized to `(0, 1]`. Any non-zero update touches its item,
/// regardless of sign.
#[derive(Debug, Clone)]
pub struct KmvSketch<T> {
    params: KmvParams,
    key: u64,
    minima: BTreeSet<u64>,
    _scalar: PhantomData<T>,
}

impl<T: Real> KmvSketch<T> {
    pub fn new(seed: u64, params: KmvParams) -> Self {
        Self { params, key: derive_seed(seed, 1), minima: BTreeSet::new(), _scalar: PhantomData }
    }

    /// Bijective in `item` for a fixed key, so distinct items never collide.
    fn hash(&self, item: u64) -> u64 {
        splitmix64(splitmix64(item) ^ self.key)
    }

    pub fn retained(&self) -> usize {
        self.minima.len()
    }
}

impl<T: Real> ObliviousSketch for KmvSketch<T> {
    type Scalar = T;
    type Params = KmvParams;

    fn init(seed: u64, params: &KmvParams) -> Self {
        Self::new(seed, *params)
    }

    fn update(&mut self, u: StreamUpdate) -> Result<(), SketchError> {
        if u.item == 0 || u.item > self.params.domain {
            return Err(SketchError::ItemOutOfRange { item: u.item, n: self.params.domain });
        }
        if u.weight == 0 {
            return Ok(());
        }
        let h = self.hash(u.item);
        if self.minima.len() < self.params.capacity {
            self.minima.insert(h);
        } else if let Some(&largest) = self.minima.last() {
            if h < largest && self.minima.insert(h) {
                self.minima.pop_last();
            }
        }
        Ok(())
    }

    fn estimate(&self) -> T {
        if self.minima.len() < self.params.capacity {
            return T::from_count(self.minima.len() as u128);
        }
        let largest = *self.minima.last().expect("at capacity");
        let normalized = (largest as f64 + 1.0) / 2f64.powi(64);
        T::lit((self.params.capacity as f64 - 1.0) / normalized)
    }
}

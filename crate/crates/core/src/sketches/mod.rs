//! Stream model, exact oracles and oblivious sketches.

mod ams;
mod flip;
pub mod hash;
mod kmv;
pub mod stream_file;

use std::collections::HashMap;
use std::fmt;
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

pub use ams::{AmsF2Sketch, AmsParams};
pub use flip::{flip_number, flip_points, min_tau, stream_tau, GValueTrace, Tau};
pub use kmv::{KmvParams, KmvSketch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("item {item} is outside the domain [1, {n}]")]
    ItemOutOfRange { item: u64, n: u64 },
    #[error("update {index}: weight {weight} is not allowed in the {model} model")]
    ModelViolation { index: usize, weight: i64, model: String },
    #[error("frequency of item {0} overflowed")]
    Overflow(u64),
    #[error("sketch parameter {name} = {value} is out of range")]
    Parameter { name: &'static str, value: f64 },
}

/// One turnstile update: add `weight` to the frequency of `item`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamUpdate {
    pub item: u64,
    pub weight: i64,
}

impl StreamUpdate {
    pub fn new(item: u64, weight: i64) -> Self {
        Self { item, weight }
    }

    pub fn insert(item: u64) -> Self {
        Self { item, weight: 1 }
    }

    pub fn delete(item: u64) -> Self {
        Self { item, weight: -1 }
    }
}

/// Which weights a stream may carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreamModel {
    /// Non-negative weights only.
    InsertionOnly,
    /// Any integer weight.
    Turnstile,
    /// Weights in `{-1, +1}`.
    UnitTurnstile,
    /// Weights in `{-1, +1}` and every prefix satisfies `|f|^2 >= |h|^2 / tau`.
    TauBounded(f64),
}

impl StreamModel {
    pub fn admits_weight(&self, weight: i64) -> bool {
        match self {
            StreamModel::InsertionOnly => weight >= 0,
            StreamModel::Turnstile => true,
            StreamModel::UnitTurnstile | StreamModel::TauBounded(_) => weight == 1 || weight == -1,
        }
    }

    /// Checks the weight of every update; the prefix condition of
    /// [`StreamModel::TauBounded`] is checked separately by [`stream_tau`].
    pub fn check(&self, updates: &[StreamUpdate]) -> Result<(), SketchError> {
        match updates.iter().position(|u| !self.admits_weight(u.weight)) {
            None => Ok(()),
            Some(index) => Err(SketchError::ModelViolation { index, weight: updates[index].weight, model: self.to_string() }),
        }
    }
}

impl fmt::Display for StreamModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamModel::InsertionOnly => write!(f, "insertion-only"),
            StreamModel::Turnstile => write!(f, "turnstile"),
            StreamModel::UnitTurnstile => write!(f, "unit-turnstile"),
            StreamModel::TauBounded(tau) => write!(f, "tau-bounded(tau={tau})"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Frequency {
    signed: i64,
    absolute: u64,
}

/// Exact frequency state `f` together with the absolute-weight vector `h`.
///
/// Both `|f|^2` and `|h|^2` are maintained incrementally; an item counts as
/// distinct from its first non-zero update onwards, even if later deletions
/// bring its frequency back to zero.
#[derive(Debug, Clone, Default)]
pub struct FrequencyVector {
    n: u64,
    entries: HashMap<u64, Frequency>,
    f2: u128,
    h2: u128,
}

impl FrequencyVector {
    pub fn new(n: u64) -> Self {
        Self { n, entries: HashMap::new(), f2: 0, h2: 0 }
    }

    pub fn domain(&self) -> u64 {
        self.n
    }

    pub fn apply(&mut self, u: StreamUpdate) -> Result<(), SketchError> {
        if u.item == 0 || u.item > self.n {
            return Err(SketchError::ItemOutOfRange { item: u.item, n: self.n });
        }
        if u.weight == 0 {
            return Ok(());
        }
        let entry = self.entries.entry(u.item).or_default();
        let signed = entry.signed.checked_add(u.weight).ok_or(SketchError::Overflow(u.item))?;
        let absolute = entry.absolute.checked_add(u.weight.unsigned_abs()).ok_or(SketchError::Overflow(u.item))?;
        let square = |x: u64| (x as u128) * (x as u128);
        self.f2 = self.f2 - square(entry.signed.unsigned_abs()) + square(signed.unsigned_abs());
        self.h2 = self.h2 - square(entry.absolute) + square(absolute);
        *entry = Frequency { signed, absolute };
        Ok(())
    }

    pub fn count(&self, item: u64) -> i64 {
        self.entries.get(&item).map_or(0, |e| e.signed)
    }

    pub fn absolute_count(&self, item: u64) -> u64 {
        self.entries.get(&item).map_or(0, |e| e.absolute)
    }

    /// `sum_l f_l^2`.
    pub fn f2(&self) -> u128 {
        self.f2
    }

    /// `sum_l h_l^2`.
    pub fn h2(&self) -> u128 {
        self.h2
    }

    /// Number of items ever touched by a non-zero update.
    pub fn distinct(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Iterates `(item, f_item)` over touched items in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.entries.iter().map(|(&k, e)| (k, e.signed))
    }
}

pub fn exact_f2(fv: &FrequencyVector) -> u128 {
    fv.f2()
}

pub fn exact_distinct(fv: &FrequencyVector) -> u64 {
    fv.distinct()
}

/// The quantity a stream algorithm estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functionality {
    F2,
    Distinct,
}

impl Functionality {
    pub fn evaluate(&self, fv: &FrequencyVector) -> u128 {
        match self {
            Functionality::F2 => exact_f2(fv),
            Functionality::Distinct => exact_distinct(fv) as u128,
        }
    }
}

impl fmt::Display for Functionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Functionality::F2 => "f2",
            Functionality::Distinct => "distinct",
        })
    }
}

/// A streaming algorithm whose randomness is fixed by a seed at construction.
///
/// `estimate` must be a pure function of the seed and the update history:
/// equal seeds fed equal histories give bit-identical estimates.
pub trait ObliviousSketch {
    type Scalar: Real;
    type Params: Clone;

    fn init(seed: u64, params: &Self::Params) -> Self
    where
        Self: Sized;

    fn update(&mut self, u: StreamUpdate) -> Result<(), SketchError>;

    fn estimate(&self) -> Self::Scalar;
}

/// Exact computation of a [`Functionality`], usable wherever a sketch is.
#[derive(Debug, Clone)]
pub struct ExactSketch<T> {
    functionality: Functionality,
    fv: FrequencyVector,
    _scalar: PhantomData<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactParams {
    pub functionality: Functionality,
    pub domain: u64,
}

impl<T> ExactSketch<T> {
    pub fn frequencies(&self) -> &FrequencyVector {
        &self.fv
    }
}

impl<T: Real> ObliviousSketch for ExactSketch<T> {
    type Scalar = T;
    type Params = ExactParams;

    fn init(_seed: u64, params: &ExactParams) -> Self {
        Self { functionality: params.functionality, fv: FrequencyVector::new(params.domain), _scalar: PhantomData }
    }

    fn update(&mut self, u: StreamUpdate) -> Result<(), SketchError> {
        self.fv.apply(u)
    }

    fn estimate(&self) -> T {
        T::from_count(self.functionality.evaluate(&self.fv))
    }
}

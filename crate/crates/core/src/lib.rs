//! Adversarially robust streaming estimation.
//!
//! A set of `k` independently seeded oblivious sketches is run side by side and
//! their answers are only ever released through differentially private
//! aggregation: a sparse-vector test decides when the published estimate has
//! gone stale, and an exponential-mechanism median over a geometric grid picks
//! the replacement. Because the adversary only learns a privatized function of
//! the sketch seeds, it cannot steer the stream toward inputs the sketches get
//! wrong, as long as the number of estimate refreshes stays within the budget.
//!
//! The crate is organized as:
//!
//! * [`dp`]: Laplace noise, AboveThreshold, private median, composition.
//! * [`sketches`]: the stream model, exact oracles, AMS and KMV sketches,
//!   flip-number and bounded-deletion analysis, and the stream file format.
//! * [`grid`]: the finite geometric candidate set estimates are rounded onto.
//! * [`robust`]: the robust wrapper, its sizing formulas and privacy accounting.
//! * [`adversary`]: the adaptive two-player game, stream generators and an
//!   F2 probing attack.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix it to `f64`.

// `!(x > 0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod dp;
pub mod grid;
pub mod robust;
pub mod scalar;
pub mod sketches;

pub use scalar::Real;

/// AMS tug-of-war F2 sketch over `f64`.
pub type AmsF2 = sketches::AmsF2Sketch<f64>;
/// K-minimum-values distinct-count sketch over `f64`.
pub type Kmv = sketches::KmvSketch<f64>;
/// Robust F2 estimator backed by AMS copies.
pub type RobustF2 = robust::RobustSketch<AmsF2>;
/// Robust distinct-count estimator backed by KMV copies.
pub type RobustDistinct = robust::RobustSketch<Kmv>;
pub type EstimateGrid = grid::EstimateGrid<f64>;
pub type PrivacyParams = dp::PrivacyParams<f64>;
pub type RobustConfig = robust::RobustConfig<f64>;
pub type GameTranscript = adversary::GameTranscript<f64>;

//! Differential-privacy building blocks: Laplace noise, the AboveThreshold
//! sparse-vector mechanism, an exponential-mechanism median over a finite grid
//! and advanced composition.
//!
//! Noise here protects the internal randomness of sketches rather than user
//! data, so samplers use plain double-precision inverse-CDF transforms.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::grid::EstimateGrid;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("parameter {name} = {value} is out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("injected noise queue is empty")]
    InjectionExhausted,
    #[error("AboveThreshold already halted; no further queries are accepted")]
    Halted,
    #[error("private median needs at least one value")]
    EmptyInput,
    #[error("value {0} is not a member of the candidate grid")]
    OffGrid(f64),
}

fn param<T: Real>(name: &'static str, value: T) -> DpError {
    DpError::Parameter { name, value: value.to_f64_lossy() }
}

/// `(epsilon, delta)` privacy guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams<T> {
    pub epsilon: T,
    pub delta: T,
}

impl<T: Real> PrivacyParams<T> {
    /// Requires `epsilon > 0` and `0 <= delta < 1`.
    pub fn new(epsilon: T, delta: T) -> Result<Self, DpError> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(param("epsilon", epsilon));
        }
        if !(delta >= T::zero() && delta < T::one()) {
            return Err(param("delta", delta));
        }
        Ok(Self { epsilon, delta })
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum NoiseMode {
    Random(ChaCha20Rng),
    /// Values are returned verbatim in FIFO order; `fill` answers once the
    /// queue is drained.
    Injected { queue: VecDeque<f64>, fill: Option<f64> },
}

/// Source of mechanism noise.
///
/// Production code uses [`NoiseSource::seeded`]. The injected modes replace
/// every draw (Laplace noise, Gumbel perturbations) with caller-chosen values
/// so mechanisms can be unit tested deterministically.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    seed: u64,
    mode: NoiseMode,
}

impl NoiseSource {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, mode: NoiseMode::Random(ChaCha20Rng::seed_from_u64(seed)) }
    }

    /// Returns `values` in order, then fails with [`DpError::InjectionExhausted`].
    pub fn injected(values: impl IntoIterator<Item = f64>) -> Self {
        Self { seed: 0, mode: NoiseMode::Injected { queue: values.into_iter().collect(), fill: None } }
    }

    /// Returns `value` for every draw.
    pub fn constant(value: f64) -> Self {
        Self { seed: 0, mode: NoiseMode::Injected { queue: VecDeque::new(), fill: Some(value) } }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_injected(&self) -> bool {
        matches!(self.mode, NoiseMode::Injected { .. })
    }

    fn injected_next(queue: &mut VecDeque<f64>, fill: Option<f64>) -> Result<f64, DpError> {
        queue.pop_front().or(fill).ok_or(DpError::InjectionExhausted)
    }

    /// Uniform draw from the open interval `(0, 1)`.
    fn open_uniform(rng: &mut ChaCha20Rng) -> f64 {
        loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Draw from `Lap(scale)`.
    pub fn laplace<T: Real>(&mut self, scale: T) -> Result<T, DpError> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(param("scale", scale));
        }
        match &mut self.mode {
            NoiseMode::Injected { queue, fill } => Self::injected_next(queue, *fill).map(T::lit),
            NoiseMode::Random(rng) => {
                // u in (-1/2, 1/2); x = -b sgn(u) ln(1 - 2|u|)
                let u = Self::open_uniform(rng) - 0.5;
                let magnitude = -(1.0 - 2.0 * u.abs()).ln();
                let x = if u < 0.0 { -magnitude } else { magnitude };
                Ok(scale * T::lit(x))
            }
        }
    }

    /// Standard Gumbel draw, used to sample the exponential mechanism.
    pub fn gumbel<T: Real>(&mut self) -> Result<T, DpError> {
        match &mut self.mode {
            NoiseMode::Injected { queue, fill } => Self::injected_next(queue, *fill).map(T::lit),
            NoiseMode::Random(rng) => {
                let u = Self::open_uniform(rng);
                Ok(T::lit(-(-u.ln()).ln()))
            }
        }
    }
}

/// Draw from `Lap(scale)`: density `exp(-|x|/scale) / (2 scale)`.
pub fn laplace_sample<T: Real>(scale: T, noise: &mut NoiseSource) -> Result<T, DpError> {
    noise.laplace(scale)
}

/// Outcome of one AboveThreshold query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Below,
    AtOrAbove,
}

/// Sparse-vector state: a noisy threshold that halts at the first noisy query
/// reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct AboveThreshold<T> {
    noisy_threshold: T,
    halted: bool,
}

impl<T: Real> AboveThreshold<T> {
    /// `t̂ = threshold + Lap(noise_scale)`.
    pub fn new(threshold: T, noise_scale: T, noise: &mut NoiseSource) -> Result<Self, DpError> {
        let noisy_threshold = threshold + noise.laplace(noise_scale)?;
        Ok(Self { noisy_threshold, halted: false })
    }

    /// Compares `query_value + Lap(noise_scale)` against the noisy threshold.
    /// A value at or above it halts the mechanism.
    pub fn step(&mut self, query_value: T, noise_scale: T, noise: &mut NoiseSource) -> Result<Crossing, DpError> {
        if self.halted {
            return Err(DpError::Halted);
        }
        let noisy = query_value + noise.laplace(noise_scale)?;
        if noisy >= self.noisy_threshold {
            self.halted = true;
            Ok(Crossing::AtOrAbove)
        } else {
            Ok(Crossing::Below)
        }
    }

    pub fn noisy_threshold(&self) -> T {
        self.noisy_threshold
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }
}

pub fn above_threshold_init<T: Real>(threshold: T, noise_scale: T, noise: &mut NoiseSource) -> Result<AboveThreshold<T>, DpError> {
    AboveThreshold::new(threshold, noise_scale, noise)
}

pub fn above_threshold_step<T: Real>(
    state: &mut AboveThreshold<T>,
    query_value: T,
    noise_scale: T,
    noise: &mut NoiseSource,
) -> Result<Crossing, DpError> {
    state.step(query_value, noise_scale, noise)
}

/// How far `candidate` is from being a median of `sorted`:
/// `max(0, |S|/2 - #{v >= x}, |S|/2 - #{v <= x})`.
///
/// `sorted` must be in ascending order.
pub fn median_rank_error<T: Real>(sorted: &[T], candidate: T) -> T {
    let half = T::from_count(sorted.len() as u128) / T::lit(2.0);
    let below = sorted.partition_point(|&v| v < candidate);
    let at_or_below = sorted.partition_point(|&v| v <= candidate);
    let at_or_above = T::from_count((sorted.len() - below) as u128);
    let at_or_below = T::from_count(at_or_below as u128);
    T::zero().max(half - at_or_above).max(half - at_or_below)
}

/// Exponential-mechanism utilities `u(x) = -median_rank_error(values, x)` for
/// every grid point, in grid order. `values` need not be sorted.
pub fn median_utilities<T: Real>(values: &[T], grid: &EstimateGrid<T>) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    grid.points().iter().map(|&x| -median_rank_error(&sorted, x)).collect()
}

/// `(epsilon0, 0)`-DP approximate median over `grid`.
///
/// Samples grid point `x` with probability proportional to
/// `exp(epsilon0 * u(x) / 2)` (utility sensitivity 1), realized as the argmax
/// of Gumbel-perturbed scores. With zero injected noise this is the
/// lowest-index utility maximizer.
pub fn private_median<T: Real>(
    values: &[T],
    grid: &EstimateGrid<T>,
    epsilon0: T,
    noise: &mut NoiseSource,
) -> Result<T, DpError> {
    if !(epsilon0 > T::zero()) || !epsilon0.is_finite() {
        return Err(param("epsilon0", epsilon0));
    }
    if values.is_empty() {
        return Err(DpError::EmptyInput);
    }
    if let Some(&off) = values.iter().find(|&&v| !grid.contains(v)) {
        return Err(DpError::OffGrid(off.to_f64_lossy()));
    }
    let half_eps = epsilon0 / T::lit(2.0);
    let mut best: Option<(T, usize)> = None;
    for (idx, utility) in median_utilities(values, grid).into_iter().enumerate() {
        let score = half_eps * utility + noise.gumbel::<T>()?;
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, idx));
        }
    }
    let (_, idx) = best.expect("grid is non-empty");
    Ok(grid.points()[idx])
}

/// Rank error `(2/epsilon0) ln(|grid| / delta)` that the private median stays
/// within with probability at least `1 - delta`.
pub fn median_error_bound<T: Real>(grid_len: usize, epsilon0: T, delta: T) -> T {
    T::lit(2.0) / epsilon0 * (T::from_count(grid_len as u128) / delta).ln()
}

/// Advanced composition of `count` adaptive `(epsilon_each, delta_each)`
/// mechanisms: `(sqrt(2 count ln(1/delta')) eps + 2 count eps^2, count delta + delta')`.
pub fn compose<T: Real>(count: u64, epsilon_each: T, delta_each: T, delta_prime: T) -> Result<PrivacyParams<T>, DpError> {
    if !(epsilon_each > T::zero() && epsilon_each <= T::one()) {
        return Err(param("epsilon_each", epsilon_each));
    }
    if !(delta_prime > T::zero() && delta_prime <= T::one()) {
        return Err(param("delta_prime", delta_prime));
    }
    if !(delta_each >= T::zero() && delta_each <= T::one()) {
        return Err(param("delta_each", delta_each));
    }
    let k = T::from_count(count as u128);
    let two = T::lit(2.0);
    let epsilon = (two * k * (T::one() / delta_prime).ln()).sqrt() * epsilon_each + two * k * epsilon_each * epsilon_each;
    Ok(PrivacyParams { epsilon, delta: k * delta_each + delta_prime })
}

//! Robust estimation from `k` oblivious sketch copies.
//!
//! Every update goes to all copies. A sparse-vector test counts how many copies
//! disagree with the published estimate `g̃` by more than a `(1 ± α/2)` factor;
//! while that noisy count stays below a noisy `k/2` threshold `g̃` is repeated.
//! Otherwise one unit of the refresh budget `λ` is spent: copy answers are
//! snapped to the estimate grid, a private median becomes the new `g̃`, and a
//! fresh threshold is drawn. Running out of budget halts the estimator.

mod sizing;

use num_traits::{Float, Zero};
use thiserror::Error;

use crate::dp::{private_median, AboveThreshold, Crossing, DpError, NoiseSource, PrivacyParams};
use crate::grid::{EstimateGrid, GridError};
use crate::sketches::hash::derive_seed;
use crate::sketches::{ObliviousSketch, SketchError, StreamUpdate};
use crate::Real;

pub use crate::grid::round_to_grid;
pub use sizing::{epsilon0, lambda_bound, privacy_accounting, required_k, FlipModel, DEFAULT_LAMBDA_CONSTANT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustError {
    #[error("parameter {name} = {value} is out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("refresh budget exhausted: the stream changed more often than lambda allows")]
    BudgetExhausted,
    #[error("estimator halted; no further updates are accepted")]
    Halted,
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Parameters of a robust estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig<T> {
    /// Target multiplicative accuracy, in `(0, 1)`.
    pub alpha: T,
    /// Privacy guarantee for the copy seeds.
    pub privacy: PrivacyParams<T>,
    /// Refresh budget; should exceed the flip number of the stream at `alpha / 10`.
    pub lambda: u64,
    /// Number of sketch copies.
    pub k: usize,
    /// Stream horizon.
    pub m: u64,
    /// Domain size.
    pub n: u64,
    /// Copy answers are assumed to lie in `[n^-c, n^c]` in magnitude, or be 0.
    pub c: T,
    /// Constant used to derive `k`.
    pub sizing_constant: T,
    /// Whether the estimate grid includes negative values.
    pub signed: bool,
}

impl<T: Real> RobustConfig<T> {
    /// Derives `lambda` from the flip-number bound of `model` at `alpha / 10`
    /// and `k` from [`required_k`] with `sizing_constant`.
    pub fn auto(
        alpha: T,
        privacy: PrivacyParams<T>,
        model: FlipModel<T>,
        m: u64,
        n: u64,
        sizing_constant: T,
    ) -> Result<Self, RobustError> {
        let m_real = T::from_count(m as u128);
        let lambda = lambda_bound(model, alpha / T::lit(10.0), m_real, T::lit(DEFAULT_LAMBDA_CONSTANT))?;
        let k = required_k(privacy.epsilon, privacy.delta, lambda, m_real, alpha, sizing_constant)?;
        let config = Self { alpha, privacy, lambda, k, m, n, c: bound_exponent(m, n), sizing_constant, signed: false };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RobustError> {
        let bad = |name, value: f64| Err(RobustError::Parameter { name, value });
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return bad("alpha", self.alpha.to_f64_lossy());
        }
        PrivacyParams::new(self.privacy.epsilon, self.privacy.delta)?;
        if self.privacy.delta == T::zero() {
            return bad("delta", 0.0);
        }
        if self.lambda == 0 {
            return bad("lambda", 0.0);
        }
        if self.k == 0 {
            return bad("k", 0.0);
        }
        if self.m == 0 {
            return bad("m", 0.0);
        }
        if self.n == 0 {
            return bad("n", 0.0);
        }
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return bad("c", self.c.to_f64_lossy());
        }
        if !(self.sizing_constant > T::zero()) {
            return bad("sizing_constant", self.sizing_constant.to_f64_lossy());
        }
        Ok(())
    }

    /// `epsilon <= 1/100`, the regime the accuracy analysis covers. Larger
    /// values are accepted.
    pub fn in_analysis_regime(&self) -> bool {
        self.privacy.epsilon <= T::lit(0.01)
    }

    pub fn epsilon0(&self) -> Result<T, RobustError> {
        epsilon0(self.privacy.epsilon, self.lambda, self.privacy.delta)
    }

    pub fn grid(&self) -> Result<EstimateGrid<T>, RobustError> {
        Ok(EstimateGrid::geometric(self.alpha, self.n, self.c, self.signed)?)
    }
}

/// Smallest `c >= 1` with `n^c >= m^2`, enough headroom for F2 of a unit-weight
/// stream and for distinct counts.
pub fn bound_exponent<T: Real>(m: u64, n: u64) -> T {
    let (m, n) = (T::from_count(m.max(2) as u128), T::from_count(n.max(2) as u128));
    (T::lit(2.0) * m.ln() / n.ln()).max(T::one())
}

/// Result of one processed update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput<T> {
    pub estimate: T,
    /// A refresh happened on this update.
    pub recomputed: bool,
    pub remaining_budget: u64,
}

/// `g ∈ (1 ± a) y`, with the interval oriented for negative `y`; `y = 0` only
/// admits `g = 0`.
fn agrees<T: Real>(g: T, y: T, a: T) -> bool {
    if y == T::zero() {
        return g == T::zero();
    }
    let (p, q) = ((T::one() - a) * y, (T::one() + a) * y);
    p.min(q) <= g && g <= p.max(q)
}

/// Robust wrapper around `k` copies of an oblivious sketch.
#[derive(Debug, Clone)]
pub struct RobustSketch<S: ObliviousSketch> {
    config: RobustConfig<S::Scalar>,
    copies: Vec<S>,
    seeds: Vec<u64>,
    grid: EstimateGrid<S::Scalar>,
    estimate: S::Scalar,
    threshold: AboveThreshold<S::Scalar>,
    outer_budget: u64,
    epsilon0: S::Scalar,
    halted: bool,
    recomputations: u64,
    noise: NoiseSource,
    answers: Vec<S::Scalar>,
}

impl<S: ObliviousSketch> RobustSketch<S> {
    /// Builds `config.k` copies seeded with the counter-split children of
    /// `root_seed`.
    pub fn new(config: RobustConfig<S::Scalar>, params: &S::Params, root_seed: u64, noise: NoiseSource) -> Result<Self, RobustError> {
        config.validate()?;
        let seeds: Vec<u64> = (0..config.k as u64).map(|j| derive_seed(root_seed, j)).collect();
        let copies = seeds.iter().map(|&s| S::init(s, params)).collect();
        Self::assemble(config, copies, seeds, noise)
    }

    /// Wraps caller-built copies; `config.k` is taken from `copies.len()`.
    pub fn with_copies(mut config: RobustConfig<S::Scalar>, copies: Vec<S>, noise: NoiseSource) -> Result<Self, RobustError> {
        config.k = copies.len();
        config.validate()?;
        Self::assemble(config, copies, Vec::new(), noise)
    }

    fn assemble(config: RobustConfig<S::Scalar>, copies: Vec<S>, seeds: Vec<u64>, mut noise: NoiseSource) -> Result<Self, RobustError> {
        let epsilon0 = config.epsilon0()?;
        let grid = config.grid()?;
        let threshold = AboveThreshold::new(Self::half(config.k), epsilon0.recip(), &mut noise)?;
        Ok(Self {
            outer_budget: config.lambda,
            answers: Vec::with_capacity(copies.len()),
            config,
            copies,
            seeds,
            grid,
            estimate: S::Scalar::zero(),
            threshold,
            epsilon0,
            halted: false,
            recomputations: 0,
            noise,
        })
    }

    fn half(k: usize) -> S::Scalar {
        S::Scalar::from_count(k as u128) / S::Scalar::lit(2.0)
    }

    /// Replaces the value published before the first refresh. Defaults to 0,
    /// the value of F2 and of the distinct count on an empty stream.
    pub fn with_initial_estimate(mut self, value: S::Scalar) -> Self {
        self.estimate = value;
        self
    }

    pub fn process(&mut self, u: StreamUpdate) -> Result<StepOutput<S::Scalar>, RobustError> {
        if self.halted {
            return Err(RobustError::Halted);
        }
        self.answers.clear();
        for copy in &mut self.copies {
            copy.update(u)?;
            let y = copy.estimate();
            self.answers.push(if !self.config.signed && y < S::Scalar::zero() { S::Scalar::zero() } else { y });
        }

        let band = self.config.alpha / S::Scalar::lit(2.0);
        let disagreeing = self.answers.iter().filter(|&&y| !agrees(self.estimate, y, band)).count();
        let scale = self.epsilon0.recip();
        let crossing = self.threshold.step(S::Scalar::from_count(disagreeing as u128), scale, &mut self.noise)?;
        if crossing == Crossing::Below {
            return Ok(self.output(false));
        }

        if self.outer_budget == 0 {
            self.halted = true;
            return Err(RobustError::BudgetExhausted);
        }
        self.outer_budget -= 1;
        let rounded: Vec<S::Scalar> = self.answers.iter().map(|&y| self.grid.round(y)).collect();
        self.estimate = private_median(&rounded, &self.grid, self.epsilon0, &mut self.noise)?;
        self.threshold = AboveThreshold::new(Self::half(self.copies.len()), scale, &mut self.noise)?;
        self.recomputations += 1;
        Ok(self.output(true))
    }

    fn output(&self, recomputed: bool) -> StepOutput<S::Scalar> {
        StepOutput { estimate: self.estimate, recomputed, remaining_budget: self.outer_budget }
    }

    pub fn estimate(&self) -> S::Scalar {
        self.estimate
    }

    pub fn config(&self) -> &RobustConfig<S::Scalar> {
        &self.config
    }

    pub fn epsilon0(&self) -> S::Scalar {
        self.epsilon0
    }

    pub fn grid(&self) -> &EstimateGrid<S::Scalar> {
        &self.grid
    }

    pub fn remaining_budget(&self) -> u64 {
        self.outer_budget
    }

    pub fn recomputations(&self) -> u64 {
        self.recomputations
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn noisy_threshold(&self) -> S::Scalar {
        self.threshold.noisy_threshold()
    }

    /// Seeds of the copies: the rows the privacy guarantee is stated over.
    /// Empty when the copies were supplied by the caller.
    pub fn copy_seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn copies(&self) -> &[S] {
        &self.copies
    }

    /// Raw copy answers from the last processed update.
    pub fn last_answers(&self) -> &[S::Scalar] {
        &self.answers
    }
}

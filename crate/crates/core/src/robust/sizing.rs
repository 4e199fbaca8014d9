//! Parameter formulas: per-mechanism noise level, copy count, refresh budget
//! and the resulting privacy guarantee.

use crate::dp::{compose, PrivacyParams};
use crate::Real;

use super::{RobustConfig, RobustError};

/// Validation ceiling used when the refresh budget is derived automatically.
pub const DEFAULT_LAMBDA_CONSTANT: f64 = 4.0;

fn bad<T: Real>(name: &'static str, value: T) -> RobustError {
    RobustError::Parameter { name, value: value.to_f64_lossy() }
}

/// Per-mechanism privacy level `epsilon / (16 sqrt(lambda ln(1/delta)))`.
pub fn epsilon0<T: Real>(epsilon: T, lambda: u64, delta: T) -> Result<T, RobustError> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(bad("epsilon", epsilon));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(bad("delta", delta));
    }
    if lambda == 0 {
        return Err(bad("lambda", T::zero()));
    }
    let lambda = T::from_count(lambda as u128);
    Ok(epsilon / (T::lit(16.0) * (lambda * (T::one() / delta).ln()).sqrt()))
}

/// Copy count `ceil(C (1/epsilon) sqrt(lambda ln(1/delta)) ln(m / (alpha delta)))`.
pub fn required_k<T: Real>(epsilon: T, delta: T, lambda: u64, m: T, alpha: T, constant: T) -> Result<usize, RobustError> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(bad("epsilon", epsilon));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(bad("delta", delta));
    }
    if lambda == 0 {
        return Err(bad("lambda", T::zero()));
    }
    if !(m > T::zero()) || !m.is_finite() {
        return Err(bad("m", m));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(bad("alpha", alpha));
    }
    if !(constant > T::zero()) || !constant.is_finite() {
        return Err(bad("sizing_constant", constant));
    }
    let lambda = T::from_count(lambda as u128);
    let k = constant / epsilon * (lambda * (T::one() / delta).ln()).sqrt() * (m / (alpha * delta)).ln();
    let k = k.ceil().to_usize().ok_or_else(|| bad("k", k))?;
    Ok(k.max(1))
}

/// Stream class whose flip number bounds the refresh budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlipModel<T> {
    InsertionOnly,
    TauBounded(T),
}

/// Refresh budget: `ceil(C ln(m) / alpha)` for insertion-only streams and
/// `ceil(C tau ln(m) / alpha^2)` for tau-bounded deletions; at least 1.
pub fn lambda_bound<T: Real>(model: FlipModel<T>, alpha: T, m: T, constant: T) -> Result<u64, RobustError> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(bad("alpha", alpha));
    }
    if !(m >= T::one()) || !m.is_finite() {
        return Err(bad("m", m));
    }
    if !(constant > T::zero()) || !constant.is_finite() {
        return Err(bad("constant", constant));
    }
    let raw = match model {
        FlipModel::InsertionOnly => constant * m.ln() / alpha,
        FlipModel::TauBounded(tau) => {
            if !(tau >= T::one()) || !tau.is_finite() {
                return Err(bad("tau", tau));
            }
            constant * tau * m.ln() / (alpha * alpha)
        }
    };
    let lambda = raw.ceil().to_u64().ok_or_else(|| bad("lambda", raw))?;
    Ok(lambda.max(1))
}

/// Privacy of a full run: `2 lambda` adaptive `(epsilon0, 0)` mechanisms
/// (one sparse-vector instance and one private median per refresh), composed
/// with slack `delta`.
pub fn privacy_accounting<T: Real>(config: &RobustConfig<T>) -> Result<PrivacyParams<T>, RobustError> {
    let eps0 = epsilon0(config.privacy.epsilon, config.lambda.max(1), config.privacy.delta)?;
    Ok(compose(2 * config.lambda, eps0, T::zero(), config.privacy.delta)?)
}

//! Finite candidate sets for private selection.
//!
//! The robust estimator never publishes an arbitrary real: every copy answer is
//! first snapped onto a geometric grid `{0} ∪ {±b^e}` with `b = 1 + α/10`,
//! restricted to magnitudes in `[n^-c, n^c]`. The private median then selects
//! among grid points, so the grid size directly sets its error term.

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid parameter {name} = {value} is out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("a grid needs at least one finite point")]
    Empty,
    #[error("grid exponent range is too large ({0} points)")]
    TooLarge(u64),
}

const MAX_POINTS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
struct Geometric<T> {
    base: T,
    ln_base: T,
    min_exp: i32,
    max_exp: i32,
    lower: T,
    upper: T,
    /// Index of the point `base^min_exp` in `points`.
    positive_start: usize,
}

/// Sorted, duplicate-free set of candidate estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateGrid<T> {
    points: Vec<T>,
    geometric: Option<Geometric<T>>,
    signed: bool,
}

impl<T: Real> EstimateGrid<T> {
    /// Geometric grid with base `1 + alpha/10` covering magnitudes in
    /// `[n^-c, n^c]`, plus zero. When `signed` the negative mirror image is
    /// included as well.
    pub fn geometric(alpha: T, n: u64, c: T, signed: bool) -> Result<Self, GridError> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(GridError::Parameter { name: "alpha", value: alpha.to_f64_lossy() });
        }
        if n == 0 {
            return Err(GridError::Parameter { name: "n", value: 0.0 });
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(GridError::Parameter { name: "c", value: c.to_f64_lossy() });
        }
        let base = T::one() + alpha / T::lit(10.0);
        let ln_base = base.ln();
        let ln_upper = c * T::from_count(n as u128).ln();
        let upper = ln_upper.exp();
        let lower = (-ln_upper).exp();

        let mut max_exp = (ln_upper / ln_base).floor().to_i64().unwrap_or(i64::MAX);
        let mut min_exp = (-ln_upper / ln_base).ceil().to_i64().unwrap_or(i64::MIN);
        let span = max_exp.saturating_sub(min_exp).saturating_add(1).max(0) as u64;
        if span > MAX_POINTS || max_exp > i32::MAX as i64 || min_exp < i32::MIN as i64 {
            return Err(GridError::TooLarge(span));
        }
        // floor/ceil of a rounded quotient can land one step outside the range
        while max_exp > min_exp && base.powf(T::lit(max_exp as f64)) > upper {
            max_exp -= 1;
        }
        while min_exp < max_exp && base.powf(T::lit(min_exp as f64)) < lower {
            min_exp += 1;
        }
        let (min_exp, max_exp) = (min_exp as i32, max_exp as i32);

        let positive: Vec<T> = (min_exp..=max_exp).map(|e| base.powf(T::lit(e as f64))).collect();
        let mut points = Vec::with_capacity(positive.len() * if signed { 2 } else { 1 } + 1);
        if signed {
            points.extend(positive.iter().rev().map(|&p| -p));
        }
        points.push(T::zero());
        let positive_start = points.len();
        points.extend(positive);

        Ok(Self {
            points,
            geometric: Some(Geometric { base, ln_base, min_exp, max_exp, lower, upper, positive_start }),
            signed,
        })
    }

    /// Arbitrary finite candidate set. Points are sorted and deduplicated.
    pub fn from_points(points: impl IntoIterator<Item = T>) -> Result<Self, GridError> {
        let mut points: Vec<T> = points.into_iter().collect();
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GridError::Parameter { name: "point", value: f64::NAN });
        }
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        points.dedup();
        if points.is_empty() {
            return Err(GridError::Empty);
        }
        let signed = points[0] < T::zero();
        Ok(Self { points, geometric: None, signed })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Base of a geometric grid, `None` for custom point sets.
    pub fn base(&self) -> Option<T> {
        self.geometric.as_ref().map(|g| g.base)
    }

    pub fn index_of(&self, value: T) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&value).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    pub fn contains(&self, value: T) -> bool {
        self.index_of(value).is_some()
    }

    /// Snaps `y` onto the grid.
    ///
    /// Geometric grids round to the nearest point in log-ratio distance, send
    /// magnitudes below `n^-c` to zero and clamp magnitudes above `n^c` to the
    /// outermost point. Unsigned grids map negative inputs to zero. Custom grids
    /// use plain distance. Ties go to the smaller magnitude.
    pub fn round(&self, y: T) -> T {
        if y.is_nan() {
            return T::zero();
        }
        match &self.geometric {
            Some(g) => self.round_geometric(g, y),
            None => self.round_nearest(y),
        }
    }

    fn round_geometric(&self, g: &Geometric<T>, y: T) -> T {
        if y < T::zero() && !self.signed {
            return T::zero();
        }
        let magnitude = y.abs();
        if magnitude < g.lower {
            return T::zero();
        }
        let snapped = if magnitude >= g.upper {
            self.points[g.positive_start + (g.max_exp - g.min_exp) as usize]
        } else {
            let exact = magnitude.ln() / g.ln_base;
            let lo = exact.floor().to_i64().unwrap_or(g.min_exp as i64).clamp(g.min_exp as i64, g.max_exp as i64);
            let hi = (lo + 1).min(g.max_exp as i64);
            let at = |e: i64| self.points[g.positive_start + (e - g.min_exp as i64) as usize];
            let (p_lo, p_hi) = (at(lo), at(hi));
            let d_lo = (magnitude / p_lo).ln().abs();
            let d_hi = (magnitude / p_hi).ln().abs();
            if d_hi < d_lo {
                p_hi
            } else {
                p_lo
            }
        };
        if y < T::zero() {
            -snapped
        } else {
            snapped
        }
    }

    fn round_nearest(&self, y: T) -> T {
        let pts = &self.points;
        let idx = pts.partition_point(|&p| p < y);
        if idx == 0 {
            return pts[0];
        }
        if idx == pts.len() {
            return pts[pts.len() - 1];
        }
        let (below, above) = (pts[idx - 1], pts[idx]);
        let (d_below, d_above) = (y - below, above - y);
        if d_below < d_above {
            below
        } else if d_above < d_below {
            above
        } else if below.abs() <= above.abs() {
            below
        } else {
            above
        }
    }
}

/// Snaps `y` onto `grid`; see [`EstimateGrid::round`].
pub fn round_to_grid<T: Real>(y: T, grid: &EstimateGrid<T>) -> T {
    grid.round(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(alpha: f64, n: u64, c: f64) -> EstimateGrid<f64> {
        EstimateGrid::geometric(alpha, n, c, false).unwrap()
    }

    #[test]
    fn exact_grid_point_is_fixed() {
        assert_eq!(grid(0.3, 1000, 2.0).round(1.0), 1.0);
    }

    #[test]
    fn ten_rounds_to_twenty_fourth_power() {
        let g = grid(1.0, 1000, 1.0);
        // 1.1^24 evaluated with a correctly rounded pow
        assert_eq!(g.round(10.0), 9.84973267580763);
        // the neighbouring exponent really is farther away in log distance
        assert!((10f64.ln() - 24.0 * 1.1f64.ln()).abs() < (10f64.ln() - 25.0 * 1.1f64.ln()).abs());
    }

    #[test]
    fn zero_and_tiny_values_map_to_zero() {
        let g = grid(0.3, 100, 1.0);
        assert_eq!(g.round(0.0), 0.0);
        assert_eq!(g.round(0.001), 0.0);
        assert_eq!(g.round(-5.0), 0.0);
    }

    #[test]
    fn huge_values_clamp_to_top() {
        let g = grid(0.3, 100, 1.0);
        let top = *g.points().last().unwrap();
        assert!(top <= 100.0 && top * 1.03 > 100.0);
        assert_eq!(g.round(1e12), top);
    }

    #[test]
    fn signed_grid_mirrors() {
        let g = EstimateGrid::geometric(0.5, 10, 1.0, true).unwrap();
        let pts = g.points();
        let zero = g.index_of(0.0).unwrap();
        assert_eq!(pts.len(), 2 * zero + 1);
        for i in 0..zero {
            assert_eq!(pts[i], -pts[pts.len() - 1 - i]);
        }
        assert_eq!(g.round(-3.0), -g.round(3.0));
    }

    #[test]
    fn grid_is_sorted_and_sized_like_log_range() {
        let g = grid(0.3, 1000, 2.0);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
        let expected = 2.0 * 2.0 * 1000f64.ln() / 1.03f64.ln();
        assert!((g.len() as f64 - expected).abs() <= 3.0, "{} vs {expected}", g.len());
        assert!(*g.points().first().unwrap() == 0.0);
    }

    #[test]
    fn ties_go_to_smaller_magnitude() {
        let g = EstimateGrid::from_points([1.0, 3.0]).unwrap();
        assert_eq!(g.round(2.0), 1.0);
        let g = EstimateGrid::from_points([-3.0, -1.0]).unwrap();
        assert_eq!(g.round(-2.0), -1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(EstimateGrid::<f64>::geometric(0.0, 10, 1.0, false).is_err());
        assert!(EstimateGrid::<f64>::geometric(0.1, 0, 1.0, false).is_err());
        assert!(EstimateGrid::<f64>::geometric(0.1, 10, -1.0, false).is_err());
        assert_eq!(EstimateGrid::<f64>::from_points(Vec::new()), Err(GridError::Empty));
    }

    #[test]
    fn works_in_single_precision() {
        let g = EstimateGrid::<f32>::geometric(1.0, 1000, 1.0, false).unwrap();
        approx::assert_relative_eq!(g.round(10.0f32), 9.849733f32, max_relative = 1e-5);
    }

    proptest::proptest! {
        #[test]
        fn rounding_lands_on_grid_and_is_nearest(y in 1e-7f64..1e7) {
            let g = grid(0.2, 1000, 2.0);
            let r = g.round(y);
            proptest::prop_assert!(g.contains(r));
            if r > 0.0 {
                let d = (y / r).ln().abs();
                for &p in g.points().iter().filter(|p| **p > 0.0) {
                    proptest::prop_assert!((y / p).ln().abs() >= d - 1e-12);
                }
            }
        }
    }
}

use super::{FrequencyVector, Functionality, SketchError, StreamModel, StreamUpdate};
use crate::Real;

/// Exact values `g(a_1), ..., g(a_i)` of a functionality along a stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GValueTrace<T> {
    values: Vec<T>,
}

impl<T: Real> GValueTrace<T> {
    pub fn new() -> Self {
        Self { values: Vec::new() }
    }

    pub fn from_values(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn from_stream(updates: &[StreamUpdate], functionality: Functionality, n: u64) -> Result<Self, SketchError> {
        let mut fv = FrequencyVector::new(n);
        let mut values = Vec::with_capacity(updates.len());
        for &u in updates {
            fv.apply(u)?;
            values.push(T::from_count(functionality.evaluate(&fv)));
        }
        Ok(Self { values })
    }

    pub fn push(&mut self, value: T) {
        self.values.push(value);
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `value` and `anchor` are within a `(1 + alpha)` factor of each other:
/// same sign and `max(|value|, |anchor|) <= (1 + alpha) min(|value|, |anchor|)`.
/// Two zeros agree; a zero never agrees with a non-zero.
fn within_factor<T: Real>(value: T, anchor: T, alpha: T) -> bool {
    let zero = T::zero();
    match (value == zero, anchor == zero) {
        (true, true) => return true,
        (true, false) | (false, true) => return false,
        _ => {}
    }
    if (value < zero) != (anchor < zero) {
        return false;
    }
    let (v, a) = (value.abs(), anchor.abs());
    v.max(a) <= v.min(a) * (T::one() + alpha)
}

/// Positions of a longest chain `0 = i_0 < i_1 < ... < i_r` in `trace` where
/// each value leaves the `(1 + alpha)` band around the previous chain value.
///
/// Monotone traces take a greedy scan (the next position is the first value
/// outside the current anchor's band). Other traces run a longest-path search
/// over value ranks in `O(len log len)`; ties go to earlier positions.
pub fn flip_points<T: Real>(trace: &[T], alpha: T) -> Vec<usize> {
    if trace.is_empty() {
        return Vec::new();
    }
    let monotone = trace.windows(2).all(|w| w[0] <= w[1]) || trace.windows(2).all(|w| w[0] >= w[1]);
    if monotone {
        greedy_points(trace, alpha)
    } else {
        longest_chain(trace, alpha)
    }
}

fn greedy_points<T: Real>(trace: &[T], alpha: T) -> Vec<usize> {
    let mut flips = Vec::new();
    let mut anchor = trace[0];
    for (i, &v) in trace.iter().enumerate().skip(1) {
        if !within_factor(v, anchor, alpha) {
            flips.push(i);
            anchor = v;
        }
    }
    flips
}

/// Chain end with the greatest depth, earliest position on ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ChainEnd {
    depth: usize,
    index: usize,
}

fn better(a: Option<ChainEnd>, b: Option<ChainEnd>) -> Option<ChainEnd> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.depth > x.depth || (y.depth == x.depth && y.index < x.index) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Max-segment tree over value ranks.
struct RankTree {
    size: usize,
    nodes: Vec<Option<ChainEnd>>,
}

impl RankTree {
    fn new(len: usize) -> Self {
        let size = len.next_power_of_two();
        Self { size, nodes: vec![None; 2 * size] }
    }

    fn insert(&mut self, rank: usize, end: ChainEnd) {
        let mut node = rank + self.size;
        self.nodes[node] = better(self.nodes[node], Some(end));
        while node > 1 {
            node /= 2;
            self.nodes[node] = better(self.nodes[2 * node], self.nodes[2 * node + 1]);
        }
    }

    /// Best entry with rank in `[lo, hi)`.
    fn query(&self, lo: usize, hi: usize) -> Option<ChainEnd> {
        let (mut lo, mut hi) = (lo + self.size, hi + self.size);
        let mut best = None;
        while lo < hi {
            if lo % 2 == 1 {
                best = better(best, self.nodes[lo]);
                lo += 1;
            }
            if hi % 2 == 1 {
                hi -= 1;
                best = better(best, self.nodes[hi]);
            }
            lo /= 2;
            hi /= 2;
        }
        best
    }
}

/// Rank range of the sorted distinct `values` agreeing with `v` under
/// [`within_factor`]. Each bound is a monotone predicate in the candidate, so
/// a binary search finds it exactly.
fn agreeing_ranks<T: Real>(values: &[T], v: T, factor: T) -> (usize, usize) {
    let zero = T::zero();
    if v > zero {
        let lo = values.partition_point(|&x| x <= zero || x * factor < v);
        let hi = values.partition_point(|&x| x <= zero || x <= v * factor);
        (lo, hi)
    } else if v < zero {
        let lo = values.partition_point(|&x| x < v * factor);
        let hi = values.partition_point(|&x| x < zero && x * factor <= v);
        (lo, hi)
    } else {
        (values.partition_point(|&x| x < zero), values.partition_point(|&x| x <= zero))
    }
}

fn longest_chain<T: Real>(trace: &[T], alpha: T) -> Vec<usize> {
    let factor = T::one() + alpha;
    let mut values = trace.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).expect("trace values are not NaN"));
    values.dedup();
    let rank = |v: T| values.partition_point(|&x| x < v);

    let mut tree = RankTree::new(values.len());
    let mut parent = vec![usize::MAX; trace.len()];
    let mut best_end = ChainEnd { depth: 0, index: 0 };
    tree.insert(rank(trace[0]), best_end);
    for (j, &v) in trace.iter().enumerate().skip(1) {
        let (lo, hi) = agreeing_ranks(&values, v, factor);
        let Some(prev) = better(tree.query(0, lo), tree.query(hi, values.len())) else {
            continue;
        };
        let end = ChainEnd { depth: prev.depth + 1, index: j };
        parent[j] = prev.index;
        tree.insert(rank(v), end);
        if end.depth > best_end.depth {
            best_end = end;
        }
    }
    let mut flips = Vec::with_capacity(best_end.depth);
    let mut at = best_end.index;
    while at != 0 {
        flips.push(at);
        at = parent[at];
    }
    flips.reverse();
    flips
}

/// Number of `(1 + alpha)`-factor changes along `trace`; see [`flip_points`].
pub fn flip_number<T: Real>(trace: &[T], alpha: T) -> usize {
    flip_points(trace, alpha).len()
}

/// Smallest `tau` for which a stream is tau-bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau<T> {
    Bounded(T),
    /// Some prefix has `|f|^2 = 0` while `|h|^2 > 0`.
    Unbounded,
}

impl<T: Real> Tau<T> {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Tau::Bounded(_))
    }

    pub fn value(&self) -> Option<T> {
        match self {
            Tau::Bounded(t) => Some(*t),
            Tau::Unbounded => None,
        }
    }
}

/// `max_i |h^(i)|^2 / |f^(i)|^2` over a history of `(|f|^2, |h|^2)` pairs.
///
/// Prefixes with both norms zero are skipped; an empty history gives 1.
pub fn min_tau<T: Real>(history: &[(u128, u128)]) -> Tau<T> {
    let mut worst = T::one();
    for &(f2, h2) in history {
        if f2 == 0 {
            if h2 > 0 {
                return Tau::Unbounded;
            }
            continue;
        }
        worst = worst.max(T::from_count(h2) / T::from_count(f2));
    }
    Tau::Bounded(worst)
}

/// [`min_tau`] of a unit-weight stream.
pub fn stream_tau<T: Real>(updates: &[StreamUpdate], n: u64) -> Result<Tau<T>, SketchError> {
    StreamModel::UnitTurnstile.check(updates)?;
    let mut fv = FrequencyVector::new(n);
    let mut history = Vec::with_capacity(updates.len());
    for &u in updates {
        fv.apply(u)?;
        history.push((fv.f2(), fv.h2()));
    }
    Ok(min_tau(&history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_has_no_flips() {
        assert_eq!(flip_number(&[5.0, 5.0, 5.0], 0.1), 0);
        assert_eq!(flip_number::<f64>(&[], 0.1), 0);
    }

    #[test]
    fn doublings_each_flip() {
        assert_eq!(flip_points(&[1.0, 2.0, 4.0, 8.0], 0.5), vec![1, 2, 3]);
    }

    #[test]
    fn anchor_only_moves_on_flip() {
        // drift of 1.2 per step never flips at alpha = 0.5 until the
        // accumulated factor passes 1.5
        assert_eq!(flip_points(&[1.0, 1.2, 1.44, 1.728], 0.5), vec![3]);
    }

    #[test]
    fn zero_and_sign_transitions_flip() {
        assert_eq!(flip_number(&[0.0, 0.0, 1.0, 1.0, 0.0], 10.0), 2);
        assert_eq!(flip_number(&[1.0, -1.0], 10.0), 1);
        assert_eq!(flip_number(&[-1.0, -1.2], 0.5), 0);
    }

    #[test]
    fn non_monotone_trace_counts_longest_chain() {
        // a scan that never drops its first anchor sees one flip here
        let trace = [1.0, 2.5, 4.5, 1.2, 3.0];
        assert_eq!(flip_points(&trace, 1.0), vec![1, 3, 4]);
    }

    fn brute_force(trace: &[f64], alpha: f64) -> usize {
        let rest = trace.len().saturating_sub(1);
        (0u32..1 << rest)
            .filter_map(|mask| {
                let mut chain = vec![0];
                chain.extend((0..rest).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
                chain.windows(2).all(|w| !within_factor(trace[w[1]], trace[w[0]], alpha)).then(|| chain.len() - 1)
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn tau_examples() {
        let ins: Vec<StreamUpdate> = (1..=10).map(StreamUpdate::insert).chain((1..=10).map(StreamUpdate::insert)).collect();
        assert_eq!(stream_tau::<f64>(&ins, 10), Ok(Tau::Bounded(1.0)));
        let ups = [StreamUpdate::insert(1), StreamUpdate::insert(2), StreamUpdate::delete(1)];
        assert_eq!(stream_tau::<f64>(&ups, 2), Ok(Tau::Bounded(5.0)));
        let ups = [StreamUpdate::insert(1), StreamUpdate::delete(1)];
        assert_eq!(stream_tau::<f64>(&ups, 2), Ok(Tau::Unbounded));
    }

    #[test]
    fn tau_rejects_non_unit_weights() {
        let ups = [StreamUpdate::new(1, 2)];
        assert!(matches!(stream_tau::<f64>(&ups, 2), Err(SketchError::ModelViolation { .. })));
    }

    #[test]
    fn trace_from_stream() {
        let ups = [StreamUpdate::insert(1), StreamUpdate::insert(1), StreamUpdate::delete(2)];
        let t = GValueTrace::<f64>::from_stream(&ups, Functionality::F2, 2).unwrap();
        assert_eq!(t.values(), &[1.0, 4.0, 5.0]);
        let t = GValueTrace::<f64>::from_stream(&ups, Functionality::Distinct, 2).unwrap();
        assert_eq!(t.values(), &[1.0, 1.0, 2.0]);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_alpha(vals in proptest::collection::vec(0.0f64..1000.0, 0..200), a in 0.01f64..2.0, extra in 0.0f64..2.0) {
            // integer-valued traces like real g-traces
            let vals: Vec<f64> = vals.into_iter().map(f64::floor).collect();
            proptest::prop_assert!(flip_number(&vals, a + extra) <= flip_number(&vals, a));
        }

        #[test]
        fn matches_exhaustive_search(vals in proptest::collection::vec(-20i32..20, 1..11), a in proptest::sample::select(vec![0.05f64, 0.25, 0.5, 1.0, 1.5, 0.1])) {
            let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
            let points = flip_points(&vals, a);
            proptest::prop_assert_eq!(points.len(), brute_force(&vals, a));
            let mut anchor = vals[0];
            for &p in &points {
                proptest::prop_assert!(!within_factor(vals[p], anchor, a));
                anchor = vals[p];
            }
        }

        #[test]
        fn scale_invariant(vals in proptest::collection::vec(-1000i32..1000, 0..200), a in 0.01f64..2.0, c in proptest::sample::select(vec![0.5f64, 2.0, 4.0, 0.25, 8.0])) {
            let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            proptest::prop_assert_eq!(flip_number(&vals, a), flip_number(&scaled, a));
        }

        #[test]
        fn tau_at_least_one_and_one_iff_no_gap(ups in proptest::collection::vec((1u64..=5, proptest::bool::ANY), 1..40)) {
            let ups: Vec<StreamUpdate> = ups.into_iter().map(|(i, ins)| if ins { StreamUpdate::insert(i) } else { StreamUpdate::delete(i) }).collect();
            let tau = stream_tau::<f64>(&ups, 5).unwrap();
            let mut fv = FrequencyVector::new(5);
            let mut all_equal = true;
            for &u in &ups {
                fv.apply(u).unwrap();
                all_equal &= fv.f2() == fv.h2();
            }
            match tau {
                Tau::Bounded(t) => {
                    proptest::prop_assert!(t >= 1.0);
                    proptest::prop_assert_eq!(t == 1.0, all_equal);
                }
                Tau::Unbounded => proptest::prop_assert!(!all_equal),
            }
        }
    }
}

use std::marker::PhantomData;

use super::hash::{derive_seed, PolyHash4, SeedStream};
use super::{ObliviousSketch, SketchError, StreamUpdate};
use crate::Real;

pub const DEFAULT_GROUPS: usize = 12;

/// Shape of an [`AmsF2Sketch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmsParams {
    /// Number of independent groups the median is taken over.
    pub groups: usize,
    /// Counters averaged inside each group.
    pub per_group: usize,
    /// Items live in `[1, domain]`.
    pub domain: u64,
    /// Expected stream length; informational.
    pub horizon: u64,
}

impl AmsParams {
    /// `12` groups of `ceil(6 / accuracy^2)` counters.
    pub fn for_accuracy(accuracy: f64, domain: u64, horizon: u64) -> Result<Self, SketchError> {
        if !(accuracy > 0.0 && accuracy.is_finite()) {
            return Err(SketchError::Parameter { name: "accuracy", value: accuracy });
        }
        let per_group = (6.0 / (accuracy * accuracy)).ceil() as usize;
        Ok(Self { groups: DEFAULT_GROUPS, per_group, domain, horizon })
    }

    pub fn counters(&self) -> usize {
        self.groups * self.per_group
    }
}

/// Domains up to this size keep a per-item cache of sign rows.
const SIGN_CACHE_DOMAIN: u64 = 1 << 20;

/// AMS tug-of-war sketch for the second frequency moment.
///
/// Counter `j` accumulates `sign_j(item) * weight` with `sign_j` drawn from a
/// 4-wise independent family; the estimate is the median over groups of the
/// mean squared counter in each group.
#[derive(Debug, Clone)]
pub struct AmsF2Sketch<T> {
    params: AmsParams,
    hashes: Vec<PolyHash4>,
    counters: Vec<i64>,
    /// Running sum of squared counters per group.
    group_squares: Vec<i128>,
    /// Bit `j` of an item's row is set when `sign_j(item) = -1`.
    sign_rows: Vec<Option<Box<[u64]>>>,
    /// Sum of `|weight|` so far; bounds every `|counter|`.
    mass: u64,
    _scalar: PhantomData<T>,
}

impl<T: Real> AmsF2Sketch<T> {
    pub fn new(seed: u64, params: AmsParams) -> Self {
        let n = params.counters();
        let mut stream = SeedStream::new(derive_seed(seed, 0));
        let hashes = (0..n).map(|_| PolyHash4::from_stream(&mut stream)).collect();
        let cached = if params.domain <= SIGN_CACHE_DOMAIN { params.domain as usize + 1 } else { 0 };
        Self {
            params,
            hashes,
            counters: vec![0; n],
            group_squares: vec![0; params.groups],
            sign_rows: vec![None; cached],
            mass: 0,
            _scalar: PhantomData,
        }
    }

    pub fn params(&self) -> &AmsParams {
        &self.params
    }

    pub fn counters(&self) -> &[i64] {
        &self.counters
    }

    /// Sign bits of `item`, one run of `ceil(per_group / 64)` words per group.
    fn sign_row(&self, item: u64) -> Box<[u64]> {
        let per = self.params.per_group;
        let words = per.div_ceil(64);
        let x = PolyHash4::field_element(item);
        let mut row = vec![0u64; words * self.params.groups];
        for (bits, hashes) in row.chunks_mut(words).zip(self.hashes.chunks(per)) {
            for (word, hashes) in bits.iter_mut().zip(hashes.chunks(64)) {
                for (b, hash) in hashes.iter().enumerate() {
                    *word |= (hash.eval(x) & 1) << b;
                }
            }
        }
        row.into_boxed_slice()
    }

    /// Applies `weight` to every counter and keeps the per-group square sums
    /// current. While `mass` and the group size stay below `2^20` everything
    /// fits in `i64`; past that, counters and square sums go through checked
    /// wide arithmetic.
    fn apply_row(&mut self, row: &[u64], weight: i64, item: u64) -> Result<(), SketchError> {
        let per = self.params.per_group;
        let words = per.div_ceil(64);
        let small = self.mass < 1 << 20 && per < 1 << 20;
        let groups = self.counters.chunks_mut(per).zip(self.group_squares.iter_mut()).zip(row.chunks(words));
        for ((group, squares), bits) in groups {
            if small {
                // sum of sign_j * c_j before the update
                let mut dot = 0i64;
                for (chunk, &word) in group.chunks_mut(64).zip(bits) {
                    for (b, c) in chunk.iter_mut().enumerate() {
                        let mask = -(((word >> b) & 1) as i64);
                        dot += (*c ^ mask) - mask;
                        *c += (weight ^ mask) - mask;
                    }
                }
                *squares += 2 * weight as i128 * dot as i128 + (per as i128) * (weight as i128) * (weight as i128);
            } else {
                for (chunk, &word) in group.chunks_mut(64).zip(bits) {
                    for (b, c) in chunk.iter_mut().enumerate() {
                        let d = if (word >> b) & 1 == 1 { weight.checked_neg() } else { Some(weight) };
                        let new = d.and_then(|d| c.checked_add(d)).ok_or(SketchError::Overflow(item))?;
                        *squares += (new as i128) * (new as i128) - (*c as i128) * (*c as i128);
                        *c = new;
                    }
                }
            }
        }
        Ok(())
    }
}

impl<T: Real> ObliviousSketch for AmsF2Sketch<T> {
    type Scalar = T;
    type Params = AmsParams;

    fn init(seed: u64, params: &AmsParams) -> Self {
        Self::new(seed, *params)
    }

    fn update(&mut self, u: StreamUpdate) -> Result<(), SketchError> {
        if u.item == 0 || u.item > self.params.domain {
            return Err(SketchError::ItemOutOfRange { item: u.item, n: self.params.domain });
        }
        if u.weight == 0 {
            return Ok(());
        }
        let slot = self.sign_rows.get_mut(u.item as usize).and_then(Option::take);
        let row = slot.unwrap_or_else(|| self.sign_row(u.item));
        self.mass = self.mass.saturating_add(u.weight.unsigned_abs());
        let result = self.apply_row(&row, u.weight, u.item);
        if let Some(slot) = self.sign_rows.get_mut(u.item as usize) {
            *slot = Some(row);
        }
        result
    }

    fn estimate(&self) -> T {
        let mut means: Vec<f64> =
            self.group_squares.iter().map(|&sq| sq as f64 / self.params.per_group as f64).collect();
        if means.is_empty() {
            return T::zero();
        }
        means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
        let mid = means.len() / 2;
        let median = if means.len() % 2 == 1 { means[mid] } else { (means[mid - 1] + means[mid]) / 2.0 };
        T::lit(median)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketches::{exact_f2, FrequencyVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(accuracy: f64) -> AmsParams {
        AmsParams::for_accuracy(accuracy, 1000, 10_000).unwrap()
    }

    #[test]
    fn sizing() {
        let p = params(0.3);
        assert_eq!((p.groups, p.per_group), (12, 67));
        assert!(AmsParams::for_accuracy(0.0, 10, 10).is_err());
    }

    #[test]
    fn fresh_sketch_estimates_zero() {
        let sk = AmsF2Sketch::<f64>::new(1, params(0.5));
        assert_eq!(sk.estimate(), 0.0);
    }

    #[test]
    fn single_item_is_exact() {
        let mut sk = AmsF2Sketch::<f64>::new(2, params(0.5));
        sk.update(StreamUpdate::new(17, 3)).unwrap();
        assert!(sk.counters().iter().all(|&c| c == 3 || c == -3));
        assert_eq!(sk.estimate(), 9.0);
    }

    #[test]
    fn insert_then_delete_cancels() {
        let mut sk = AmsF2Sketch::<f64>::new(3, params(0.5));
        sk.update(StreamUpdate::insert(1)).unwrap();
        sk.update(StreamUpdate::delete(1)).unwrap();
        assert!(sk.counters().iter().all(|&c| c == 0));
    }

    #[test]
    fn heavy_weights_take_the_wide_path() {
        let p = AmsParams { groups: 3, per_group: 4, domain: 8, horizon: 10 };
        let mut sk = AmsF2Sketch::<f64>::new(5, p);
        let mut fv = FrequencyVector::new(8);
        for (item, w) in [(1, 3), (2, 1 << 40), (1, -(1 << 35)), (3, 7), (2, -5)] {
            sk.update(StreamUpdate::new(item, w)).unwrap();
            fv.apply(StreamUpdate::new(item, w)).unwrap();
        }
        for (j, hash) in sk.hashes.iter().enumerate() {
            let expected: i64 = (1..=8).map(|i| hash.sign(PolyHash4::field_element(i)) * fv.count(i)).sum();
            assert_eq!(sk.counters()[j], expected);
        }
        let c = sk.counters();
        assert_eq!(sk.estimate(), median_of_group_means(c, 4));
        assert!(sk.update(StreamUpdate::new(4, i64::MAX)).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut sk = AmsF2Sketch::<f64>::new(3, params(0.5));
        assert_eq!(sk.update(StreamUpdate::insert(1001)), Err(SketchError::ItemOutOfRange { item: 1001, n: 1000 }));
    }

    #[test]
    fn accurate_on_oblivious_streams() {
        let p = AmsParams::for_accuracy(0.3, 100, 2000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 200;
        let good = (0..trials)
            .filter(|&t| {
                let mut sk = AmsF2Sketch::<f64>::new(t, p);
                let mut fv = FrequencyVector::new(100);
                for _ in 0..2000 {
                    let u = StreamUpdate::new(rng.gen_range(1..=100), if rng.gen_bool(0.8) { 1 } else { -1 });
                    sk.update(u).unwrap();
                    fv.apply(u).unwrap();
                }
                let truth = exact_f2(&fv) as f64;
                (sk.estimate() - truth).abs() <= 0.3 * truth
            })
            .count();
        assert!(good as f64 >= 0.85 * trials as f64, "{good}/{trials}");
    }

    fn median_of_group_means(counters: &[i64], per_group: usize) -> f64 {
        let mut means: Vec<f64> = counters
            .chunks(per_group)
            .map(|g| g.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / per_group as f64)
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = means.len() / 2;
        if means.len() % 2 == 1 {
            means[mid]
        } else {
            (means[mid - 1] + means[mid]) / 2.0
        }
    }

    proptest::proptest! {
        #[test]
        fn estimate_is_median_of_group_means(seed in 0u64..1000, groups in 1usize..6, ups in proptest::collection::vec((1u64..=20, -4i64..=4), 0..60)) {
            let p = AmsParams { groups, per_group: 7, domain: 20, horizon: 60 };
            let mut sk = AmsF2Sketch::<f64>::new(seed, p);
            for &(i, w) in &ups {
                sk.update(StreamUpdate::new(i, w)).unwrap();
            }
            proptest::prop_assert_eq!(sk.estimate(), median_of_group_means(sk.counters(), 7));
        }

        #[test]
        fn uncached_domain_matches_cached(seed in 0u64..1000, ups in proptest::collection::vec((1u64..=30, -2i64..=2), 0..60)) {
            let small = AmsParams { groups: 2, per_group: 40, domain: 30, horizon: 60 };
            let huge = AmsParams { domain: u64::MAX >> 1, ..small };
            let mut a = AmsF2Sketch::<f64>::new(seed, small);
            let mut b = AmsF2Sketch::<f64>::new(seed, huge);
            for &(i, w) in &ups {
                a.update(StreamUpdate::new(i, w)).unwrap();
                b.update(StreamUpdate::new(i, w)).unwrap();
            }
            proptest::prop_assert_eq!(a.counters(), b.counters());
        }

        #[test]
        fn replay_is_bit_identical(seed in proptest::num::u64::ANY, ups in proptest::collection::vec((1u64..=50, -3i64..=3), 0..100)) {
            let p = AmsParams { groups: 3, per_group: 5, domain: 50, horizon: 100 };
            let mut a = AmsF2Sketch::<f64>::new(seed, p);
            let mut b = AmsF2Sketch::<f64>::new(seed, p);
            for &(i, w) in &ups {
                a.update(StreamUpdate::new(i, w)).unwrap();
                b.update(StreamUpdate::new(i, w)).unwrap();
            }
            proptest::prop_assert_eq!(a.counters(), b.counters());
            proptest::prop_assert_eq!(a.estimate().to_bits(), b.estimate().to_bits());
        }

        #[test]
        fn counters_are_signed_sums(seed in 0u64..1000, ups in proptest::collection::vec((1u64..=10, -3i64..=3), 0..40)) {
            let p = AmsParams { groups: 2, per_group: 3, domain: 10, horizon: 40 };
            let mut sk = AmsF2Sketch::<f64>::new(seed, p);
            let mut fv = FrequencyVector::new(10);
            for &(i, w) in &ups {
                sk.update(StreamUpdate::new(i, w)).unwrap();
                fv.apply(StreamUpdate::new(i, w)).unwrap();
            }
            for (j, hash) in sk.hashes.iter().enumerate() {
                let expected: i64 = (1..=10).map(|i| hash.sign(PolyHash4::field_element(i)) * fv.count(i)).sum();
                proptest::prop_assert_eq!(sk.counters()[j], expected);
            }
        }
    }
}

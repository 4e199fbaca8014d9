//! Seed splitting and k-wise independent hashing.

/// Mersenne prime `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based split: the `index`-th child seed of `root`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Sequential stream of derived values; used to fill hash coefficients.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        splitmix64(self.state)
    }
}

#[inline]
fn reduce(x: u128) -> u64 {
    let folded = (x & MERSENNE_61 as u128) as u64 + (x >> 61) as u64;
    let folded = (folded & MERSENNE_61) + (folded >> 61);
    if folded >= MERSENNE_61 {
        folded - MERSENNE_61
    } else {
        folded
    }
}

/// One partial Mersenne fold: congruent to `x`, below `2^61 + 2^(bits(x) - 61)`.
#[inline]
fn fold(x: u128) -> u64 {
    (x as u64 & MERSENNE_61) + (x >> 61) as u64
}

/// Degree-3 polynomial over GF(2^61 - 1): a 4-wise independent family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyHash4 {
    coeffs: [u64; 4],
}

impl PolyHash4 {
    pub fn from_stream(stream: &mut SeedStream) -> Self {
        let mut coeffs = [0u64; 4];
        for c in &mut coeffs {
            *c = reduce(stream.next_u64() as u128);
        }
        Self { coeffs }
    }

    /// Reduces an item id into the field; call once per update and reuse.
    #[inline]
    pub fn field_element(item: u64) -> u64 {
        reduce(item as u128)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        let [a0, a1, a2, a3] = self.coeffs;
        // coefficients and x are below 2^61, so the lazily folded accumulator
        // stays below 2^62, 2^63 and 2^64 after the three steps
        let mut acc = fold(a3 as u128 * x as u128 + a2 as u128);
        acc = fold(acc as u128 * x as u128 + a1 as u128);
        acc = fold(acc as u128 * x as u128 + a0 as u128);
        reduce(acc as u128)
    }

    /// `+1` or `-1` from the low bit of the hash.
    #[inline]
    pub fn sign(&self, x: u64) -> i64 {
        if self.eval(x) & 1 == 0 {
            1
        } else {
            -1
        }
    }
}

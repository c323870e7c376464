//! Bit-packed bipolar hypervectors.
//!
//! Component `i` is stored as bit `i % 64` of word `i / 64`. Bit 0 encodes
//! +1 and bit 1 encodes -1, so XOR of two packed vectors is the
//! componentwise product of the bipolar vectors and the popcount of the XOR
//! is the number of disagreeing components. Bits past `dim` in the last word
//! are always zero.

mod lfsr;
mod rng;

use std::fmt;

pub use lfsr::{LfsrStream, DEFAULT_POLYNOMIAL};
pub use rng::SeededRng;

use rand::RngCore;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

/// Mask of the valid bits in the last storage word.
fn tail_mask(dim: usize) -> u64 {
    match dim % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HyperVector {
    dim: usize,
    words: Box<[u64]>,
}

impl HyperVector {
    /// All components +1; the identity for [`bind`](Self::bind).
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            words: vec![0; words_for(dim)].into_boxed_slice(),
        })
    }

    /// Independent fair ±1 components.
    pub fn random(dim: usize, rng: &mut SeededRng) -> Result<Self> {
        check_dim(dim)?;
        let words = (0..words_for(dim)).map(|_| rng.next_u64()).collect();
        Ok(Self::from_raw(dim, words))
    }

    /// The next `dim` output bits of `stream`, bit `i` becoming component `i`.
    pub fn from_lfsr(dim: usize, stream: &mut LfsrStream) -> Result<Self> {
        check_dim(dim)?;
        let words = (0..words_for(dim))
            .map(|w| {
                let n = (dim - w * WORD_BITS).min(WORD_BITS) as u32;
                stream.next_bits(n)
            })
            .collect();
        Ok(Self::from_raw(dim, words))
    }

    /// From explicit bits (`true` = -1).
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        check_dim(bits.len())?;
        let mut words = vec![0u64; words_for(bits.len())];
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
        Ok(Self::from_raw(bits.len(), words))
    }

    /// From bipolar components; any negative value maps to -1, the rest to +1.
    pub fn from_bipolar(values: &[i8]) -> Result<Self> {
        let bits: Vec<bool> = values.iter().map(|&v| v < 0).collect();
        Self::from_bits(&bits)
    }

    /// From packed words; bits beyond `dim` are cleared.
    pub fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        check_dim(dim)?;
        check_same(words_for(dim), words.len())?;
        Ok(Self::from_raw(dim, words))
    }

    fn from_raw(dim: usize, mut words: Vec<u64>) -> Self {
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(dim);
        }
        Self {
            dim,
            words: words.into_boxed_slice(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Raw bit `i` (`true` = -1).
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.dim, "component {i} out of range {}", self.dim);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    /// Bipolar component `i`.
    pub fn component(&self, i: usize) -> i8 {
        if self.bit(i) {
            -1
        } else {
            1
        }
    }

    pub fn to_bipolar(&self) -> Vec<i8> {
        (0..self.dim).map(|i| self.component(i)).collect()
    }

    /// Number of -1 components.
    pub fn count_negative(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Componentwise bipolar product (packed XOR). Self-inverse.
    pub fn bind(&self, other: &Self) -> Result<Self> {
        check_same(self.dim, other.dim)?;
        let words = self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self::from_raw(self.dim, words))
    }

    /// Number of disagreeing components.
    pub fn distance(&self, other: &Self) -> Result<u32> {
        check_same(self.dim, other.dim)?;
        Ok(self.distance_unchecked(other))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Normalized Hamming distance in `[0, 1]`.
    pub fn hamming(&self, other: &Self) -> Result<f64> {
        Ok(f64::from(self.distance(other)?) / self.dim as f64)
    }

    /// Every component negated.
    pub fn complement(&self) -> Self {
        Self::from_raw(self.dim, self.words.iter().map(|w| !w).collect())
    }

    /// Copy with the listed components negated.
    pub fn with_flipped(&self, positions: &[usize]) -> Self {
        let mut words = self.words.to_vec();
        for &i in positions {
            assert!(i < self.dim, "component {i} out of range {}", self.dim);
            words[i / WORD_BITS] ^= 1 << (i % WORD_BITS);
        }
        Self::from_raw(self.dim, words)
    }
}

impl fmt::Debug for HyperVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown = self.dim.min(64);
        let bits: String = (0..shown)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect();
        let ellipsis = if self.dim > shown { "…" } else { "" };
        write!(f, "HyperVector({}; {bits}{ellipsis})", self.dim)
    }
}

/// Componentwise running sum of bipolar vectors, prior to binarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accumulator {
    counts: Vec<i32>,
    n_added: u32,
}

impl Accumulator {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            counts: vec![0; dim],
            n_added: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[i32] {
        &self.counts
    }

    pub fn n_added(&self) -> u32 {
        self.n_added
    }

    pub fn is_empty(&self) -> bool {
        self.n_added == 0
    }

    pub fn add(&mut self, v: &HyperVector) -> Result<()> {
        check_same(self.dim(), v.dim)?;
        for (chunk, &word) in self.counts.chunks_mut(WORD_BITS).zip(v.words.iter()) {
            for (b, c) in chunk.iter_mut().enumerate() {
                *c += 1 - 2 * ((word >> b) & 1) as i32;
            }
        }
        self.n_added += 1;
        Ok(())
    }

    /// Sign of each count; zero counts take the component of `tiebreak`.
    pub fn binarize(&self, tiebreak: &HyperVector) -> Result<HyperVector> {
        check_same(self.dim(), tiebreak.dim)?;
        let words = self
            .counts
            .chunks(WORD_BITS)
            .zip(tiebreak.words.iter())
            .map(|(chunk, &tie)| {
                chunk.iter().enumerate().fold(0u64, |word, (b, &c)| {
                    let negative = match c.signum() {
                        1 => 0,
                        -1 => 1,
                        _ => (tie >> b) & 1,
                    };
                    word | (negative << b)
                })
            })
            .collect();
        Ok(HyperVector::from_raw(self.dim(), words))
    }
}

/// Bit-sliced counter for bundling many vectors at once.
///
/// Keeps, per component, the number of -1 operands in vertical binary form:
/// plane `p` holds bit `p` of every component's count. Adding a vector is a
/// ripple-carry over the planes, a few word operations per storage word.
/// Produces exactly the same sums as [`Accumulator`].
#[derive(Debug, Clone)]
pub struct BundleCounter {
    dim: usize,
    n_words: usize,
    planes: Vec<u64>,
    n_added: u32,
}

impl BundleCounter {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            n_words: words_for(dim),
            planes: Vec::new(),
            n_added: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_added(&self) -> u32 {
        self.n_added
    }

    pub fn add(&mut self, v: &HyperVector) -> Result<()> {
        check_same(self.dim, v.dim)?;
        self.add_words(|w| v.words[w]);
        Ok(())
    }

    /// Adds `bind(a, b)` without materialising it.
    pub fn add_bound(&mut self, a: &HyperVector, b: &HyperVector) -> Result<()> {
        check_same(self.dim, a.dim)?;
        check_same(self.dim, b.dim)?;
        self.add_words(|w| a.words[w] ^ b.words[w]);
        Ok(())
    }

    fn add_words(&mut self, word: impl Fn(usize) -> u64) {
        self.n_added += 1;
        let needed = (32 - self.n_added.leading_zeros()) as usize;
        if self.planes.len() < needed * self.n_words {
            self.planes.resize(needed * self.n_words, 0);
        }
        let n_planes = self.planes.len() / self.n_words;
        for w in 0..self.n_words {
            let mut carry = word(w);
            let mut p = 0;
            while carry != 0 && p < n_planes {
                let slot = &mut self.planes[p * self.n_words + w];
                let next = *slot & carry;
                *slot ^= carry;
                carry = next;
                p += 1;
            }
        }
    }

    /// Number of -1 operands at component `i`.
    fn negatives(&self, i: usize) -> u32 {
        let (w, b) = (i / WORD_BITS, i % WORD_BITS);
        let n_planes = self.planes.len() / self.n_words;
        (0..n_planes).fold(0, |acc, p| {
            acc | ((((self.planes[p * self.n_words + w] >> b) & 1) as u32) << p)
        })
    }

    pub fn to_accumulator(&self) -> Accumulator {
        let n = self.n_added as i32;
        Accumulator {
            counts: (0..self.dim)
                .map(|i| n - 2 * self.negatives(i) as i32)
                .collect(),
            n_added: self.n_added,
        }
    }

    /// Same result as `to_accumulator().binarize(tiebreak)`.
    pub fn binarize(&self, tiebreak: &HyperVector) -> Result<HyperVector> {
        check_same(self.dim, tiebreak.dim)?;
        let n = self.n_added;
        let mut words = vec![0u64; self.n_words];
        for (w, out) in words.iter_mut().enumerate() {
            let tie = tiebreak.words[w];
            let bits = (self.dim - w * WORD_BITS).min(WORD_BITS);
            for b in 0..bits {
                let twice = 2 * self.negatives(w * WORD_BITS + b);
                let negative = if twice > n {
                    1
                } else if twice < n {
                    0
                } else {
                    (tie >> b) & 1
                };
                *out |= negative << b;
            }
        }
        Ok(HyperVector::from_raw(self.dim, words))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> HyperVector {
        let v: Vec<bool> = s.chars().map(|c| c == '1').collect();
        HyperVector::from_bits(&v).unwrap()
    }

    #[test]
    fn zero_dim_rejected() {
        let mut rng = SeededRng::new(1);
        assert!(matches!(
            HyperVector::random(0, &mut rng),
            Err(Error::InvalidDimension(0))
        ));
        assert!(Accumulator::new(0).is_err());
        assert!(BundleCounter::new(0).is_err());
    }

    #[test]
    fn storage_and_padding() {
        let mut rng = SeededRng::new(9);
        let v = HyperVector::random(5000, &mut rng).unwrap();
        assert_eq!(v.words().len(), 79);
        assert_eq!(v.words()[78] >> (5000 % 64), 0);
        assert_eq!(v.complement().words()[78] >> (5000 % 64), 0);
        assert_eq!(v.hamming(&v.complement()).unwrap(), 1.0);
    }

    #[test]
    fn hand_xor_dim8() {
        let x = bits("00001111");
        let y = bits("01010101");
        assert_eq!(x.bind(&y).unwrap(), bits("01011010"));
    }

    #[test]
    fn self_bind_is_identity() {
        let mut rng = SeededRng::new(2);
        let x = HyperVector::random(130, &mut rng).unwrap();
        let id = HyperVector::identity(130).unwrap();
        assert_eq!(x.bind(&x).unwrap(), id);
        assert_eq!(x.bind(&x).unwrap().hamming(&id).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_dims() {
        let a = HyperVector::identity(10).unwrap();
        let b = HyperVector::identity(11).unwrap();
        assert!(matches!(
            a.bind(&b),
            Err(Error::DimensionMismatch {
                expected: 10,
                found: 11
            })
        ));
        assert!(a.hamming(&b).is_err());
        let mut acc = Accumulator::new(10).unwrap();
        assert!(acc.add(&b).is_err());
        assert!(acc.binarize(&b).is_err());
    }

    #[test]
    fn random_pairs_near_orthogonal() {
        let mut r1 = SeededRng::new(11);
        let mut r2 = SeededRng::new(12);
        let a = HyperVector::random(5000, &mut r1).unwrap();
        let b = HyperVector::random(5000, &mut r2).unwrap();
        let h = a.hamming(&b).unwrap();
        assert!((0.47..=0.53).contains(&h), "{h}");
    }

    #[test]
    fn random_is_deterministic() {
        let a = HyperVector::random(5000, &mut SeededRng::new(5)).unwrap();
        let b = HyperVector::random(5000, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a.hamming(&b).unwrap(), 0.0);
    }

    #[test]
    fn random_bit_balance_dim64() {
        // 1000 draws of 64 bits: negatives ~ Binomial(64000, 1/2), mean 32000,
        // sd 126.49. The two-sided 99% band (z = 2.5758) is 31675..=32325.
        let mut rng = SeededRng::new(2024);
        let total: u32 = (0..1000)
            .map(|_| HyperVector::random(64, &mut rng).unwrap().count_negative())
            .sum();
        assert!((31_675..=32_325).contains(&total), "{total}");
    }

    #[test]
    fn accumulate_hand_sums() {
        let x = bits("00001111");
        let y = bits("01010101");
        let z = bits("00110011");
        let mut acc = Accumulator::new(8).unwrap();
        acc.add(&x).unwrap();
        assert_eq!(acc.counts(), &[1, 1, 1, 1, -1, -1, -1, -1]);
        acc.add(&y).unwrap();
        acc.add(&z).unwrap();
        // columns: x,y,z bits -> sum of (1 - 2 bit)
        assert_eq!(acc.counts(), &[3, 1, 1, -1, 1, -1, -1, -3]);
        assert_eq!(acc.n_added(), 3);
    }

    #[test]
    fn accumulate_twice_doubles() {
        let x = bits("0110");
        let mut acc = Accumulator::new(4).unwrap();
        acc.add(&x).unwrap();
        acc.add(&x).unwrap();
        assert_eq!(acc.counts(), &[2, -2, -2, 2]);
    }

    #[test]
    fn binarize_rules() {
        let mut rng = SeededRng::new(4);
        let x = HyperVector::random(200, &mut rng).unwrap();
        let y = HyperVector::random(200, &mut rng).unwrap();
        let tie = HyperVector::random(200, &mut rng).unwrap();

        let mut single = Accumulator::new(200).unwrap();
        single.add(&x).unwrap();
        assert_eq!(single.binarize(&tie).unwrap(), x);

        let mut majority = single.clone();
        majority.add(&x).unwrap();
        majority.add(&y).unwrap();
        assert_eq!(majority.binarize(&tie).unwrap(), x);

        let mut pair = single;
        pair.add(&y).unwrap();
        let out = pair.binarize(&tie).unwrap();
        for i in 0..200 {
            let expected = if x.bit(i) == y.bit(i) {
                x.bit(i)
            } else {
                tie.bit(i)
            };
            assert_eq!(out.bit(i), expected);
        }
    }

    #[test]
    fn bundle_counter_matches_accumulator() {
        let mut rng = SeededRng::new(8);
        for dim in [1, 63, 64, 65, 200] {
            let vs: Vec<_> = (0..37)
                .map(|_| HyperVector::random(dim, &mut rng).unwrap())
                .collect();
            let key = HyperVector::random(dim, &mut rng).unwrap();
            let tie = HyperVector::random(dim, &mut rng).unwrap();
            let mut acc = Accumulator::new(dim).unwrap();
            let mut counter = BundleCounter::new(dim).unwrap();
            for v in &vs {
                acc.add(&v.bind(&key).unwrap()).unwrap();
                counter.add_bound(v, &key).unwrap();
            }
            assert_eq!(counter.to_accumulator(), acc);
            assert_eq!(counter.binarize(&tie).unwrap(), acc.binarize(&tie).unwrap());
        }
    }

    #[test]
    fn lfsr_vector_regenerates() {
        let mut s = LfsrStream::default_with_state(0x1234_5678).unwrap();
        let a = HyperVector::from_lfsr(5000, &mut s).unwrap();
        s.reset();
        let b = HyperVector::from_lfsr(5000, &mut s).unwrap();
        assert_eq!(a, b);
        let r = HyperVector::random(5000, &mut SeededRng::new(77)).unwrap();
        let h = a.hamming(&r).unwrap();
        assert!((0.45..=0.55).contains(&h), "{h}");
    }

    #[test]
    fn lfsr_vector_packs_stream_bits() {
        let mut s = LfsrStream::new(&[4, 3], 1).unwrap();
        let v = HyperVector::from_lfsr(15, &mut s).unwrap();
        assert_eq!(v, bits("100011110101100"));
    }
}

//! Feature-vector to hypervector encoding.
//!
//! A sample `x` of `m` features becomes the majority of `ID_i ⊕ L(x_i)`
//! over all features: `ID_i` marks the feature position (item memory) and
//! `L(x_i)` is the level vector of its quantized value (level memory).

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hypervector::{BundleCounter, HyperVector, SeededRng};

/// Random identifier vector per feature position.
#[derive(Debug, Clone)]
pub struct ItemMemory {
    dim: usize,
    ids: Vec<HyperVector>,
}

impl ItemMemory {
    pub fn new(features: usize, dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if features == 0 {
            return Err(Error::NoFeatures);
        }
        let ids = (0..features)
            .map(|_| HyperVector::random(dim, rng))
            .collect::<Result<_>>()?;
        Ok(Self { dim, ids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[HyperVector] {
        &self.ids
    }
}

/// Level (continuous item) memory: `ℓ` vectors whose pairwise distance grows
/// linearly with the level gap.
///
/// Level 0 is random. Each following level flips the next
/// `floor(d / (2(ℓ-1)))` positions of one fixed random permutation, so the
/// flips are cumulative and disjoint and the last level lands close to
/// distance 0.5 from the first. Level 0 represents `v_max` and level `ℓ-1`
/// represents `v_min`.
#[derive(Debug, Clone)]
pub struct LevelMemory {
    dim: usize,
    v_min: f64,
    v_max: f64,
    flips_per_level: usize,
    levels: Vec<HyperVector>,
}

impl LevelMemory {
    pub fn new(
        levels: usize,
        dim: usize,
        v_min: f64,
        v_max: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidLevelCount(levels));
        }
        // also rejects NaN bounds
        if v_min.partial_cmp(&v_max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidRange { v_min, v_max });
        }
        let first = HyperVector::random(dim, rng)?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.shuffle(rng);

        let flips_per_level = dim / (2 * (levels - 1));
        let mut out = Vec::with_capacity(levels);
        out.push(first);
        for step in 0..levels - 1 {
            let span = &order[step * flips_per_level..(step + 1) * flips_per_level];
            let next = out[step].with_flipped(span);
            out.push(next);
        }
        Ok(Self {
            dim,
            v_min,
            v_max,
            flips_per_level,
            levels: out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }

    pub fn flips_per_level(&self) -> usize {
        self.flips_per_level
    }

    pub fn levels(&self) -> &[HyperVector] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &HyperVector {
        &self.levels[index]
    }

    /// Level index of `value`: 0 for `v_max`, `ℓ-1` for `v_min`, rounding to
    /// the nearest level in between. Out-of-range values are clamped and NaN
    /// is treated as `v_min`.
    pub fn quantize(&self, value: f64) -> usize {
        let clamped = if value.is_nan() {
            self.v_min
        } else {
            value.clamp(self.v_min, self.v_max)
        };
        let top = (self.levels.len() - 1) as f64;
        let pos = (self.v_max - clamped) / (self.v_max - self.v_min) * top;
        (pos.round() as usize).min(self.levels.len() - 1)
    }

    pub fn lookup(&self, value: f64) -> &HyperVector {
        self.level(self.quantize(value))
    }
}

/// A sample after encoding, with its task-local class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    pub vector: HyperVector,
    pub label: usize,
}

/// Item memory and level memory shared by every task.
#[derive(Debug, Clone)]
pub struct Encoder {
    items: ItemMemory,
    levels: LevelMemory,
}

impl Encoder {
    pub fn new(items: ItemMemory, levels: LevelMemory) -> Result<Self> {
        if items.dim() != levels.dim() {
            return Err(Error::DimensionMismatch {
                expected: items.dim(),
                found: levels.dim(),
            });
        }
        Ok(Self { items, levels })
    }

    pub fn dim(&self) -> usize {
        self.items.dim()
    }

    pub fn features(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &ItemMemory {
        &self.items
    }

    pub fn levels(&self) -> &LevelMemory {
        &self.levels
    }

    /// Encodes `features`, resolving zero sums with one random vector drawn
    /// from `rng`.
    pub fn encode(&self, features: &[f32], rng: &mut SeededRng) -> Result<HyperVector> {
        self.check_len(features)?;
        let tiebreak = HyperVector::random(self.dim(), rng)?;
        self.encode_with_tiebreak(features, &tiebreak)
    }

    pub fn encode_with_tiebreak(
        &self,
        features: &[f32],
        tiebreak: &HyperVector,
    ) -> Result<HyperVector> {
        self.check_len(features)?;
        let mut counter = BundleCounter::new(self.dim())?;
        for (id, &x) in self.items.ids().iter().zip(features) {
            counter.add_bound(id, self.levels.lookup(f64::from(x)))?;
        }
        counter.binarize(tiebreak)
    }

    pub fn encode_sample(
        &self,
        features: &[f32],
        label: usize,
        rng: &mut SeededRng,
    ) -> Result<EncodedSample> {
        Ok(EncodedSample {
            vector: self.encode(features, rng)?,
            label,
        })
    }

    fn check_len(&self, features: &[f32]) -> Result<()> {
        if features.len() == self.features() {
            Ok(())
        } else {
            Err(Error::FeatureCountMismatch {
                expected: self.features(),
                found: features.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels(l: usize, d: usize, seed: u64) -> LevelMemory {
        LevelMemory::new(l, d, 0.0, 1.0, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn item_memory_near_orthogonal() {
        let im = ItemMemory::new(784, 5000, &mut SeededRng::new(1)).unwrap();
        assert_eq!(im.len(), 784);
        // 306936 pairs. P(outside [0.47, 0.53]) = 2.0626e-5 per pair from the
        // exact Binomial(5000, 1/2) tail, so ~6.3 outliers are expected and
        // 15 is the 99.9% Poisson quantile. Outside [0.46, 0.54] the expected
        // count is 0.0043.
        let ids = im.ids();
        let mut outliers = 0;
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let h = ids[i].hamming(&ids[j]).unwrap();
                assert!((0.46..=0.54).contains(&h), "{i},{j}: {h}");
                if !(0.47..=0.53).contains(&h) {
                    outliers += 1;
                }
            }
        }
        assert!(outliers <= 15, "{outliers}");
    }

    #[test]
    fn item_memory_edges() {
        assert!(matches!(
            ItemMemory::new(0, 10, &mut SeededRng::new(1)),
            Err(Error::NoFeatures)
        ));
        assert!(ItemMemory::new(3, 0, &mut SeededRng::new(1)).is_err());
        let one = ItemMemory::new(1, 100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(one.len(), 1);
        let again = ItemMemory::new(1, 100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(one.ids(), again.ids());
    }

    #[test]
    fn two_levels_are_half_apart() {
        let lm = levels(2, 5000, 3);
        assert_eq!(lm.level(0).distance(lm.level(1)).unwrap(), 2500);
    }

    #[test]
    fn eleven_levels_linear_distance() {
        let lm = levels(11, 5000, 4);
        assert_eq!(lm.flips_per_level(), 250);
        for i in 0..11 {
            let h = lm.level(0).hamming(lm.level(i)).unwrap();
            assert_eq!(h, (i * 250) as f64 / 5000.0);
        }
    }

    #[test]
    fn ten_levels_small_dim() {
        let lm = levels(10, 64, 5);
        assert_eq!(lm.level(0).hamming(lm.level(9)).unwrap(), 27.0 / 64.0);
    }

    #[test]
    fn level_distance_monotone() {
        let lm = levels(10, 5000, 6);
        for i in 0..10 {
            for j in i..10 {
                for k in j..10 {
                    let ij = lm.level(i).distance(lm.level(j)).unwrap();
                    let ik = lm.level(i).distance(lm.level(k)).unwrap();
                    assert!(ij <= ik);
                }
            }
        }
        let end = lm.level(0).hamming(lm.level(9)).unwrap();
        assert!((0.45..=0.55).contains(&end));
    }

    #[test]
    fn level_memory_errors() {
        let mut rng = SeededRng::new(1);
        assert!(matches!(
            LevelMemory::new(1, 100, 0.0, 1.0, &mut rng),
            Err(Error::InvalidLevelCount(1))
        ));
        assert!(matches!(
            LevelMemory::new(4, 100, 1.0, 1.0, &mut rng),
            Err(Error::InvalidRange { .. })
        ));
        assert!(LevelMemory::new(4, 100, f64::NAN, 1.0, &mut rng).is_err());
    }

    #[test]
    fn quantize_orientation() {
        let lm = levels(11, 100, 1);
        assert_eq!(lm.quantize(1.0), 0);
        assert_eq!(lm.quantize(0.0), 10);
        // 1 + round(0.5 * 10) = 6 in one-based levels
        assert_eq!(lm.quantize(0.5), 5);
        assert_eq!(lm.quantize(7.0), 0);
        assert_eq!(lm.quantize(-3.0), 10);
        assert_eq!(lm.quantize(f64::NAN), 10);
    }

    fn encoder(m: usize, d: usize, l: usize, seed: u64) -> Encoder {
        let mut rng = SeededRng::new(seed);
        let im = ItemMemory::new(m, d, &mut rng).unwrap();
        let lm = LevelMemory::new(l, d, 0.0, 1.0, &mut rng).unwrap();
        Encoder::new(im, lm).unwrap()
    }

    #[test]
    fn single_feature_is_bound_pair() {
        let enc = encoder(1, 300, 10, 2);
        let t = enc.encode(&[0.3], &mut SeededRng::new(9)).unwrap();
        let expected = enc.items().ids()[0].bind(enc.levels().lookup(0.3)).unwrap();
        assert_eq!(t, expected);
    }

    #[test]
    fn two_features_use_tiebreak_on_disagreement() {
        let enc = encoder(2, 300, 10, 3);
        let tie = HyperVector::random(300, &mut SeededRng::new(10)).unwrap();
        let t = enc.encode_with_tiebreak(&[0.0, 1.0], &tie).unwrap();
        let a = enc.items().ids()[0].bind(enc.levels().level(9)).unwrap();
        let b = enc.items().ids()[1].bind(enc.levels().level(0)).unwrap();
        for i in 0..300 {
            let expected = if a.bit(i) == b.bit(i) {
                a.bit(i)
            } else {
                tie.bit(i)
            };
            assert_eq!(t.bit(i), expected);
        }
    }

    #[test]
    fn length_mismatch() {
        let enc = encoder(3, 64, 4, 1);
        assert!(matches!(
            enc.encode(&[0.1, 0.2], &mut SeededRng::new(1)),
            Err(Error::FeatureCountMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn encoding_locality() {
        let m = 784;
        let enc = encoder(m, 5000, 10, 4);
        let mut rng = SeededRng::new(5);
        let x: Vec<f32> = (0..m).map(|_| rng.unit() as f32).collect();
        let mut y = x.clone();
        y[100] = 1.0 - y[100];
        let a = enc.encode(&x, &mut SeededRng::new(6)).unwrap();
        let b = enc.encode(&y, &mut SeededRng::new(6)).unwrap();
        let h = a.hamming(&b).unwrap();
        assert!(h < 2.0 / m as f64 + 0.05, "{h}");
    }
}

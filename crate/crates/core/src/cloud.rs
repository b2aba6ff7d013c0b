//! Normal cloud model: backward estimation from drops, forward drop
//! generation, membership degree and cloud-to-cloud similarity.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The (Ex, En, He) triple describing a qualitative trust concept.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrustCloud<T> {
    /// Expectation, in `[0, 1]`.
    pub ex: T,
    /// Entropy, `>= 0`.
    pub en: T,
    /// Hyper-entropy, `>= 0`.
    pub he: T,
}

impl<T: Scalar> TrustCloud<T> {
    pub fn new(ex: T, en: T, he: T) -> Result<Self> {
        if !(ex >= T::zero() && ex <= T::one()) {
            return Err(Error::Domain { value: ex.to_f64_lossy() });
        }
        if !(en >= T::zero()) {
            return Err(Error::Domain { value: en.to_f64_lossy() });
        }
        if !(he >= T::zero()) {
            return Err(Error::Domain { value: he.to_f64_lossy() });
        }
        Ok(Self { ex, en, he })
    }

    pub fn is_degenerate(&self) -> bool {
        self.en == T::zero() && self.he == T::zero()
    }

    /// Component-wise `a * self + b * other`.
    pub fn blend(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            ex: a * self.ex + b * other.ex,
            en: a * self.en + b * other.en,
            he: a * self.he + b * other.he,
        }
    }
}

/// A bounded, sliding window of cloud drops. Pushing past capacity evicts
/// the oldest drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropSet<T> {
    drops: VecDeque<T>,
    capacity: usize,
}

impl<T: Scalar> DropSet<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "drop set capacity must be positive");
        Self { drops: VecDeque::with_capacity(capacity), capacity }
    }

    /// Appends a drop, returning the evicted one when the window was full.
    pub fn push(&mut self, drop: T) -> Option<T> {
        let evicted = if self.drops.len() == self.capacity {
            self.drops.pop_front()
        } else {
            None
        };
        self.drops.push_back(drop);
        evicted
    }

    pub fn extend<I: IntoIterator<Item = T>>(&mut self, drops: I) {
        for d in drops {
            self.push(d);
        }
    }

    pub fn len(&self) -> usize {
        self.drops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drops.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.drops.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.drops.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.drops.iter()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.drops.iter().copied().collect()
    }

    pub fn mean(&self) -> Option<T> {
        if self.drops.is_empty() {
            return None;
        }
        let sum: T = self.drops.iter().copied().sum();
        Some(sum / T::from_usize(self.drops.len()).unwrap())
    }

    pub fn backward_cloud(&self) -> Result<TrustCloud<T>> {
        let (a, b) = self.drops.as_slices();
        if b.is_empty() {
            backward_cloud(a)
        } else {
            backward_cloud(&self.to_vec())
        }
    }
}

/// Estimates (Ex, En, He) from a sample of drops.
///
/// Ex is the sample mean, En is `sqrt(pi/2)` times the mean absolute
/// deviation, and He is `sqrt(s² - En²)` with `s²` the unbiased sample
/// variance. A negative radicand yields `He = 0`.
pub fn backward_cloud<T: Scalar>(drops: &[T]) -> Result<TrustCloud<T>> {
    let n = drops.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if let Some(&bad) = drops.iter().find(|&&d| !(d >= T::zero() && d <= T::one())) {
        return Err(Error::Domain { value: bad.to_f64_lossy() });
    }
    let nf = T::from_usize(n).unwrap();
    let ex = drops.iter().copied().sum::<T>() / nf;
    let mad = drops.iter().map(|&d| (d - ex).abs()).sum::<T>() / nf;
    let en = T::lit(std::f64::consts::FRAC_PI_2).sqrt() * mad;
    let var = drops.iter().map(|&d| (d - ex) * (d - ex)).sum::<T>() / (nf - T::one());
    let radicand = var - en * en;
    let he = if radicand > T::zero() { radicand.sqrt() } else { T::zero() };
    Ok(TrustCloud { ex: ex.clamp_unit(), en, he })
}

/// Draws |σ| with σ ~ N(en, he²).
#[inline]
fn sample_spread<T: Scalar, R: Rng + ?Sized>(en: T, he: T, rng: &mut R) -> T {
    T::normal(rng, en, he).abs()
}

/// Generates one cloud drop: σ ~ N(En, He²), then d ~ N(Ex, σ²), clamped to
/// `[0, 1]`.
pub fn generate_drop<T: Scalar, R: Rng + ?Sized>(cloud: &TrustCloud<T>, rng: &mut R) -> T {
    let sigma = sample_spread(cloud.en, cloud.he, rng);
    T::normal(rng, cloud.ex, sigma).clamp_unit()
}

/// Degree to which `drop` belongs to `standard`:
/// `exp(-(drop - Ex)² / (2 σ²))` with σ ~ N(En, He²).
pub fn membership_degree<T: Scalar, R: Rng + ?Sized>(
    drop: T,
    standard: &TrustCloud<T>,
    rng: &mut R,
) -> Result<T> {
    let diff = drop - standard.ex;
    if standard.en == T::zero() {
        return if diff == T::zero() { Ok(T::one()) } else { Err(Error::ZeroEntropy) };
    }
    let sigma = sample_spread(standard.en, standard.he, rng);
    if diff == T::zero() {
        return Ok(T::one());
    }
    if sigma == T::zero() {
        return Ok(T::zero());
    }
    Ok((-(diff * diff) / (T::lit(2.0) * sigma * sigma)).exp())
}

/// Mean membership in `standard` of `n_drops` drops generated from
/// `individual`.
pub fn similarity<T: Scalar, R: Rng + ?Sized>(
    individual: &TrustCloud<T>,
    standard: &TrustCloud<T>,
    n_drops: usize,
    rng: &mut R,
) -> Result<T> {
    assert!(n_drops >= 1, "similarity needs at least one drop");
    let mut total = T::zero();
    for _ in 0..n_drops {
        let d = generate_drop(individual, rng);
        total = total + membership_degree(d, standard, rng)?;
    }
    Ok(total / T::from_usize(n_drops).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    // Independent two-pass evaluation of the estimator, written out by hand.
    fn oracle(drops: &[f64]) -> (f64, f64, f64) {
        let n = drops.len() as f64;
        let mut s = 0.0;
        for d in drops {
            s += d;
        }
        let ex = s / n;
        let mut abs = 0.0;
        let mut sq = 0.0;
        for d in drops {
            abs += (d - ex).abs();
            sq += (d - ex).powi(2);
        }
        let en = (std::f64::consts::PI / 2.0).sqrt() * abs / n;
        let r = sq / (n - 1.0) - en * en;
        (ex, en, if r > 0.0 { r.sqrt() } else { 0.0 })
    }

    #[test]
    fn constant_drops() {
        let c = backward_cloud(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(c, TrustCloud { ex: 0.5, en: 0.0, he: 0.0 });
    }

    #[test]
    fn spread_drops() {
        let drops = [0.2, 0.4, 0.6, 0.8];
        let c = backward_cloud(&drops).unwrap();
        let (ex, en, he) = oracle(&drops);
        assert_relative_eq!(c.ex, 0.5, max_relative = 1e-12);
        assert_relative_eq!(c.en, en, max_relative = 1e-12);
        assert_relative_eq!(c.he, he, max_relative = 1e-12);
        assert_relative_eq!(ex, 0.5, max_relative = 1e-12);
        assert_relative_eq!(en, 0.250_662_827_463_1, max_relative = 1e-9);
        assert_relative_eq!(he, 0.061_925_5, max_relative = 1e-5);
    }

    #[test]
    fn negative_radicand_clamps_he() {
        let c = backward_cloud(&[0.4, 0.4, 0.6, 0.6]).unwrap();
        assert_relative_eq!(c.ex, 0.5, max_relative = 1e-12);
        assert_relative_eq!(c.en, 0.125_331_413_731_55, max_relative = 1e-9);
        assert_eq!(c.he, 0.0);
    }

    #[test]
    fn backward_errors() {
        assert_eq!(
            backward_cloud(&[0.3]).unwrap_err(),
            Error::InsufficientData { needed: 2, got: 1 }
        );
        assert!(matches!(backward_cloud(&[0.3, 1.2]), Err(Error::Domain { .. })));
        assert!(matches!(backward_cloud(&[0.3, f64::NAN]), Err(Error::Domain { .. })));
    }

    #[test]
    fn f32_backward_matches_f64() {
        let c32 = backward_cloud(&[0.2f32, 0.4, 0.6, 0.8]).unwrap();
        assert_relative_eq!(c32.en as f64, 0.250_662_827, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_cloud_emits_expectation() {
        let c = TrustCloud { ex: 0.5, en: 0.0, he: 0.0 };
        let mut r = rng(3);
        for _ in 0..100 {
            assert_eq!(generate_drop(&c, &mut r), 0.5);
        }
    }

    #[test]
    fn drop_mean_tracks_expectation() {
        let c = TrustCloud { ex: 0.5, en: 0.1, he: 0.0 };
        let mut r = rng(11);
        let n = 100_000;
        let mean = (0..n).map(|_| generate_drop(&c, &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn drops_are_clamped() {
        let c = TrustCloud { ex: 0.99, en: 0.1, he: 0.0 };
        let mut r = rng(5);
        assert!((0..10_000).map(|_| generate_drop(&c, &mut r)).all(|d| (0.0..=1.0).contains(&d)));
    }

    #[test]
    fn membership_examples() {
        let std = TrustCloud { ex: 0.5, en: 0.1, he: 0.0 };
        let mut r = rng(1);
        assert_eq!(membership_degree(0.5, &std, &mut r).unwrap(), 1.0);
        assert_relative_eq!(
            membership_degree(0.6, &std, &mut r).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            membership_degree(0.5 + 3.0 * 0.1, &std, &mut r).unwrap(),
            (-4.5f64).exp(),
            max_relative = 1e-9
        );
        let flat = TrustCloud { ex: 0.5, en: 0.0, he: 0.0 };
        assert_eq!(membership_degree(0.5, &flat, &mut r).unwrap(), 1.0);
        assert_eq!(membership_degree(0.6, &flat, &mut r).unwrap_err(), Error::ZeroEntropy);
    }

    #[test]
    fn similarity_examples() {
        let mut r = rng(21);
        let point = TrustCloud { ex: 0.5, en: 0.0, he: 0.0 };
        let std = TrustCloud { ex: 0.5, en: 0.1, he: 0.0 };
        assert_eq!(similarity(&point, &std, 50, &mut r).unwrap(), 1.0);

        let s = similarity(&std, &std, 100_000, &mut r).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 0.02, "self similarity {s}");

        let low = TrustCloud { ex: 0.1, en: 0.02, he: 0.0 };
        let high = TrustCloud { ex: 0.9, en: 0.02, he: 0.0 };
        assert!(similarity(&low, &high, 50, &mut r).unwrap() < 1e-6);
    }

    #[test]
    fn similarity_prefers_self() {
        let c = TrustCloud { ex: 0.5, en: 0.05, he: 0.01 };
        let far = TrustCloud { ex: 0.5 + 3.0 * 0.05, ..c };
        let mut wins = 0;
        for seed in 0..100 {
            let mut r = rng(seed);
            let own = similarity(&c, &c, 50, &mut r).unwrap();
            let other = similarity(&c, &far, 50, &mut r).unwrap();
            if own >= other {
                wins += 1;
            }
        }
        assert!(wins > 50, "self-similarity won {wins}/100");
    }

    #[test]
    fn drop_set_slides() {
        let mut s = DropSet::new(3);
        assert_eq!(s.push(0.1), None);
        s.push(0.2);
        s.push(0.3);
        assert!(s.is_full());
        assert_eq!(s.push(0.4), Some(0.1));
        assert_eq!(s.to_vec(), vec![0.2, 0.3, 0.4]);
        assert_relative_eq!(s.mean().unwrap(), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn roundtrip_recovers_parameters() {
        let mut r = rng(99);
        let c = TrustCloud { ex: 0.6, en: 0.05, he: 0.01 };
        let drops: Vec<f64> = (0..10_000).map(|_| generate_drop(&c, &mut r)).collect();
        let back = backward_cloud(&drops).unwrap();
        assert!((back.ex - c.ex).abs() < 0.01);
        assert!((back.en - c.en).abs() < 0.05 * c.en);
    }

    proptest! {
        #[test]
        fn backward_is_permutation_invariant(
            mut drops in prop::collection::vec(0.0f64..=1.0, 2..40),
            seed in any::<u64>(),
        ) {
            let a = backward_cloud(&drops).unwrap();
            use rand::seq::SliceRandom;
            drops.shuffle(&mut rng(seed));
            let b = backward_cloud(&drops).unwrap();
            prop_assert!((a.ex - b.ex).abs() < 1e-12);
            prop_assert!((a.en - b.en).abs() < 1e-12);
            prop_assert!((a.he - b.he).abs() < 1e-6);
        }

        #[test]
        fn membership_decreases_with_distance(d1 in 0.0f64..0.5, d2 in 0.0f64..0.5) {
            prop_assume!((d1 - d2).abs() > 1e-9);
            let std = TrustCloud { ex: 0.5, en: 0.1, he: 0.0 };
            let mut r = rng(0);
            let m1 = membership_degree(0.5 + d1, &std, &mut r).unwrap();
            let m2 = membership_degree(0.5 + d2, &std, &mut r).unwrap();
            prop_assert_eq!(d1 < d2, m1 > m2);
        }
    }
}

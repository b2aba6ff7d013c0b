//! Steady-state trust machinery: recommendation fusion, per-target drop
//! windows and individual clouds, classification against the standard
//! clouds, and adaptive updates of those standard clouds.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{similarity, DropSet, TrustCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::training::StandardClouds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Malicious,
    Normal,
}

/// Fuses a recommendation: `t_ik` is the requester's own average trust in
/// the target (0 when it has none), `t_jk` the recommender's, `t_ij` the
/// requester's trust in the recommender.
pub fn recommend_trust<T: Scalar>(t_ik: T, t_jk: T, t_ij: T) -> T {
    let fused = if t_ik > T::zero() {
        (t_ik + t_jk * t_ij) / (T::one() + t_ij)
    } else {
        t_jk * t_ij
    };
    fused.clamp_unit()
}

/// What one observer knows about one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord<T> {
    pub window: DropSet<T>,
    /// Mean of the current window contents.
    pub mean: T,
    /// Latest value stored.
    pub latest: T,
    /// Present exactly when the window is full.
    pub cloud: Option<TrustCloud<T>>,
    /// Set once the observer has handed the target its own traffic.
    pub interacted: bool,
}

/// Per-observer trust store keyed by target id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustStore<T> {
    records: BTreeMap<usize, TargetRecord<T>>,
    thr_drp: usize,
}

impl<T: Scalar> TrustStore<T> {
    pub fn new(thr_drp: usize) -> Self {
        assert!(thr_drp >= 2, "an individual cloud needs at least two drops");
        Self { records: BTreeMap::new(), thr_drp }
    }

    pub fn get(&self, target: usize) -> Option<&TargetRecord<T>> {
        self.records.get(&target)
    }

    /// Average trust in `target`, or zero without any record.
    pub fn mean(&self, target: usize) -> T {
        self.records.get(&target).map_or(T::zero(), |r| r.mean)
    }

    pub fn cloud(&self, target: usize) -> Option<&TrustCloud<T>> {
        self.records.get(&target).and_then(|r| r.cloud.as_ref())
    }

    pub fn interacted(&self, target: usize) -> bool {
        self.records.get(&target).is_some_and(|r| r.interacted)
    }

    pub fn mark_interacted(&mut self, target: usize) {
        let thr = self.thr_drp;
        self.records
            .entry(target)
            .or_insert_with(|| TargetRecord {
                window: DropSet::new(thr),
                mean: T::zero(),
                latest: T::zero(),
                cloud: None,
                interacted: false,
            })
            .interacted = true;
    }

    pub fn targets(&self) -> impl Iterator<Item = (usize, &TargetRecord<T>)> + '_ {
        self.records.iter().map(|(&k, v)| (k, v))
    }

    /// Stores a trust value for `target`: slides the window, refreshes the
    /// mean and rebuilds the individual cloud once the window is full.
    pub fn record_trust(&mut self, target: usize, value: T) -> &TargetRecord<T> {
        debug_assert!(value >= T::zero() && value <= T::one(), "trust value out of range");
        let value = value.clamp_unit();
        let thr = self.thr_drp;
        let rec = self.records.entry(target).or_insert_with(|| TargetRecord {
            window: DropSet::new(thr),
            mean: T::zero(),
            latest: T::zero(),
            cloud: None,
            interacted: false,
        });
        rec.window.push(value);
        rec.latest = value;
        rec.mean = rec.window.mean().unwrap_or(value);
        rec.cloud = if rec.window.is_full() {
            Some(rec.window.backward_cloud().expect("window holds valid drops"))
        } else {
            None
        };
        rec
    }
}

/// Decision knobs for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyParams<T> {
    /// Margin, in standard-cloud entropies, beyond which Ex alone decides.
    pub kappa: T,
    /// Drops generated per similarity estimate.
    pub n_drp: usize,
}

impl<T: Scalar> Default for ClassifyParams<T> {
    fn default() -> Self {
        Self { kappa: T::lit(3.0), n_drp: 50 }
    }
}

/// Classifies a target from its individual cloud.
///
/// Ex far below the malicious standard (by `kappa` entropies) or far above the
/// normal standard decides directly; otherwise the standard with the higher
/// similarity wins, ties going to `Malicious`.
pub fn classify<T: Scalar, R: Rng + ?Sized>(
    itc: Option<&TrustCloud<T>>,
    std: &StandardClouds<T>,
    params: &ClassifyParams<T>,
    rng: &mut R,
) -> Result<Verdict> {
    let itc = itc.ok_or(Error::InsufficientEvidence)?;
    if itc.ex < std.malicious.ex - params.kappa * std.malicious.en {
        return Ok(Verdict::Malicious);
    }
    if itc.ex > std.normal.ex + params.kappa * std.normal.en {
        return Ok(Verdict::Normal);
    }
    let to_malicious = similarity(itc, &std.malicious, params.n_drp, rng)?;
    let to_normal = similarity(itc, &std.normal, params.n_drp, rng)?;
    Ok(if to_malicious >= to_normal { Verdict::Malicious } else { Verdict::Normal })
}

/// Weighted blend `alpha * prior + beta * fresh` of two clouds.
pub fn update_standard_cloud<T: Scalar>(
    prior: &TrustCloud<T>,
    fresh: &TrustCloud<T>,
    alpha: T,
    beta: T,
) -> Result<TrustCloud<T>> {
    if (alpha + beta - T::one()).abs() > T::lit(1e-9) || alpha < T::zero() || beta < T::zero() {
        return Err(Error::Config(format!(
            "update weights must be non-negative and sum to 1, got {alpha} + {beta}"
        )));
    }
    Ok(prior.blend(alpha, fresh, beta))
}

/// Pools of recently classified trust values awaiting a standard-cloud update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAccumulators<T> {
    pub malicious_pool: DropSet<T>,
    pub normal_pool: DropSet<T>,
}

impl<T: Scalar> UpdateAccumulators<T> {
    pub fn new(max_drp: usize) -> Self {
        Self { malicious_pool: DropSet::new(max_drp), normal_pool: DropSet::new(max_drp) }
    }
}

/// Adds `value` to the pool matching `verdict`. When that pool fills, a
/// fresh cloud is estimated from it, blended into the matching standard
/// cloud, and the pool is emptied. Returns the verdict whose cloud changed.
pub fn accumulate_and_maybe_update<T: Scalar>(
    acc: &mut UpdateAccumulators<T>,
    verdict: Verdict,
    value: T,
    std: &mut StandardClouds<T>,
    alpha: T,
    beta: T,
) -> Result<Option<Verdict>> {
    let (pool, target) = match verdict {
        Verdict::Malicious => (&mut acc.malicious_pool, &mut std.malicious),
        Verdict::Normal => (&mut acc.normal_pool, &mut std.normal),
    };
    pool.push(value.clamp_unit());
    if !pool.is_full() {
        return Ok(None);
    }
    let fresh = pool.backward_cloud()?;
    *target = update_standard_cloud(target, &fresh, alpha, beta)?;
    pool.clear();
    Ok(Some(verdict))
}

//! Forwarding evidence, trust attributes (TFR/SFR) and the interval type-2
//! fuzzy estimator that turns them into a single trust value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What an observer saw after handing a packet to a forwarder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForwardingEvent {
    ForwardedTimely,
    ForwardedDelayed,
    /// Not overheard in time. Tampered packets fail authentication and land
    /// here as well.
    Dropped,
}

/// Per-observer, per-target forwarding tallies.
///
/// Invariant: `timely <= forwarded <= sent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvidenceWindow {
    pub sent: u32,
    pub forwarded: u32,
    pub timely: u32,
}

impl EvidenceWindow {
    pub fn record(mut self, event: ForwardingEvent) -> Self {
        self.sent += 1;
        match event {
            ForwardingEvent::ForwardedTimely => {
                self.forwarded += 1;
                self.timely += 1;
            }
            ForwardingEvent::ForwardedDelayed => self.forwarded += 1,
            ForwardingEvent::Dropped => {}
        }
        self
    }

    /// TFR = timely / forwarded (1 when nothing was forwarded),
    /// SFR = forwarded / sent.
    pub fn attributes<T: Scalar>(&self) -> Result<TrustAttributes<T>> {
        if self.sent == 0 {
            return Err(Error::NoEvidence);
        }
        let sfr = T::from_u32(self.forwarded).unwrap() / T::from_u32(self.sent).unwrap();
        let tfr = if self.forwarded == 0 {
            T::one()
        } else {
            T::from_u32(self.timely).unwrap() / T::from_u32(self.forwarded).unwrap()
        };
        Ok(TrustAttributes { tfr, sfr })
    }
}

pub fn record_event(window: EvidenceWindow, event: ForwardingEvent) -> EvidenceWindow {
    window.record(event)
}

pub fn compute_attributes<T: Scalar>(window: &EvidenceWindow) -> Result<TrustAttributes<T>> {
    window.attributes()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustAttributes<T> {
    /// Timely forwarding rate.
    pub tfr: T,
    /// Successful forwarding rate.
    pub sfr: T,
}

/// Anything that maps trust attributes to a trust value in `[0, 1]`.
pub trait TrustEstimator<T: Scalar> {
    fn estimate(&self, attrs: &TrustAttributes<T>) -> T;
}

/// Linguistic grade of an input or output fuzzy set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Grade {
    Low = 0,
    Medium = 1,
    High = 2,
}

const GRADES: [Grade; 3] = [Grade::Low, Grade::Medium, Grade::High];

/// Interval type-2 system with three triangular sets per input.
///
/// Each input set has an upper membership function of half-width
/// `upper_half_width` and a lower one of half-width `lower_half_width`
/// around the same apex. The nine rules map the pair of antecedent grades to
/// the weaker of the two, firing with the product of the grades. The reduced
/// interval is spanned by the center-of-sets outputs of the lower and upper
/// embedded type-1 systems; the crisp output is its midpoint, rescaled so
/// that all-Low inputs give exactly 0 and all-High inputs exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct It2Fls<T> {
    pub apexes: [T; 3],
    pub upper_half_width: T,
    pub lower_half_width: T,
    pub output_centroids: [T; 3],
}

impl<T: Scalar> Default for It2Fls<T> {
    fn default() -> Self {
        Self {
            apexes: [T::zero(), T::lit(0.5), T::one()],
            upper_half_width: T::lit(0.55),
            lower_half_width: T::lit(0.45),
            output_centroids: [T::zero(), T::lit(0.5), T::one()],
        }
    }
}

fn triangle<T: Scalar>(x: T, apex: T, half_width: T) -> T {
    (T::one() - (x - apex).abs() / half_width).max(T::zero())
}

impl<T: Scalar> It2Fls<T> {
    fn grades(&self, x: T, half_width: T) -> [T; 3] {
        self.apexes.map(|a| triangle(x, a, half_width))
    }

    /// Center-of-sets output of the type-1 system whose sets all have the
    /// given half-width.
    pub fn embedded_output(&self, attrs: &TrustAttributes<T>, half_width: T) -> T {
        let gt = self.grades(attrs.tfr, half_width);
        let gs = self.grades(attrs.sfr, half_width);
        let (mut num, mut den) = (T::zero(), T::zero());
        for &a in &GRADES {
            for &b in &GRADES {
                let f = gt[a as usize] * gs[b as usize];
                num = num + f * self.output_centroids[a.min(b) as usize];
                den = den + f;
            }
        }
        if den > T::zero() {
            num / den
        } else {
            self.output_centroids[Grade::Medium as usize]
        }
    }

    pub fn reduced_interval(&self, attrs: &TrustAttributes<T>) -> (T, T) {
        let lo = self.embedded_output(attrs, self.lower_half_width);
        let hi = self.embedded_output(attrs, self.upper_half_width);
        (lo.min(hi), lo.max(hi))
    }

    fn midpoint(&self, attrs: &TrustAttributes<T>) -> T {
        let (l, r) = self.reduced_interval(attrs);
        (l + r) / T::lit(2.0)
    }
}

impl<T: Scalar> TrustEstimator<T> for It2Fls<T> {
    fn estimate(&self, attrs: &TrustAttributes<T>) -> T {
        let attrs = TrustAttributes { tfr: attrs.tfr.clamp_unit(), sfr: attrs.sfr.clamp_unit() };
        let lo = self.midpoint(&TrustAttributes { tfr: T::zero(), sfr: T::zero() });
        let hi = self.midpoint(&TrustAttributes { tfr: T::one(), sfr: T::one() });
        ((self.midpoint(&attrs) - lo) / (hi - lo)).clamp_unit()
    }
}

/// Trust value of a forwarder under the default fuzzy estimator.
pub fn infer_trust<T: Scalar>(attrs: &TrustAttributes<T>) -> T {
    It2Fls::default().estimate(attrs)
}

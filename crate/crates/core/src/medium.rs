//! Wireless medium quality and first-order radio energy accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Channel regime active from `start_round` onwards. The channel is bad with
/// probability `alpha0 / (alpha0 + alpha1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPhase {
    pub alpha0: f64,
    pub alpha1: f64,
    #[serde(default)]
    pub start_round: usize,
}

impl ChannelPhase {
    pub fn new(alpha0: f64, alpha1: f64, start_round: usize) -> Result<Self> {
        stationary_bad_prob(alpha0, alpha1)?;
        Ok(Self { alpha0, alpha1, start_round })
    }

    pub fn bad_prob(&self) -> f64 {
        self.alpha0 / (self.alpha0 + self.alpha1)
    }

    pub fn perfect() -> Self {
        Self { alpha0: 0.0, alpha1: 1.0, start_round: 0 }
    }
}

pub fn stationary_bad_prob(alpha0: f64, alpha1: f64) -> Result<f64> {
    if !(alpha0 >= 0.0 && alpha1 >= 0.0) || alpha0 + alpha1 <= 0.0 {
        return Err(Error::Config(format!(
            "channel rates must be non-negative with a positive sum, got ({alpha0}, {alpha1})"
        )));
    }
    Ok(alpha0 / (alpha0 + alpha1))
}

/// One independent reception/overhearing opportunity for a single device.
/// Returns `false` when the channel is bad and the packet is lost.
#[inline]
pub fn channel_ok<R: Rng + ?Sized>(phase: &ChannelPhase, rng: &mut R) -> bool {
    if phase.alpha0 == 0.0 {
        return true;
    }
    if phase.alpha1 == 0.0 {
        return false;
    }
    rng.random::<f64>() >= phase.bad_prob()
}

/// Picks the phase active in `round` from a schedule sorted by start round.
pub fn phase_at(schedule: &[ChannelPhase], round: usize) -> &ChannelPhase {
    schedule
        .iter()
        .rev()
        .find(|p| p.start_round <= round)
        .unwrap_or(&schedule[0])
}

/// Radio and processing energy constants, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams<T> {
    /// Electronics, J/bit.
    pub e_elec: T,
    /// Free-space amplifier, J/bit/m².
    pub eps_fs: T,
    /// Multipath amplifier, J/bit/m⁴.
    pub eps_amp: T,
    /// Aggregation, J/bit/message.
    pub e_da: T,
    /// Overhearing, J/bit.
    pub e_h: T,
    /// Monitoring, J/s.
    pub e_m: T,
    /// Initial energy per device, J.
    pub e0: T,
}

impl<T: Scalar> Default for EnergyParams<T> {
    fn default() -> Self {
        Self {
            e_elec: T::lit(50e-9),
            eps_fs: T::lit(10e-12),
            eps_amp: T::lit(0.0013e-12),
            e_da: T::lit(5e-9),
            e_h: T::lit(5e-9),
            e_m: T::lit(10e-9),
            e0: T::one(),
        }
    }
}

impl<T: Scalar> EnergyParams<T> {
    /// Crossover distance between the free-space and multipath regimes.
    pub fn crossover(&self) -> T {
        (self.eps_fs / self.eps_amp).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.e_elec, self.eps_fs, self.eps_amp, self.e_da, self.e_h, self.e_m, self.e0];
        if all.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::Config("energy parameters must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn tx_energy<T: Scalar>(bits: u64, distance: T, p: &EnergyParams<T>) -> T {
    let b = T::from_u64(bits).unwrap();
    let d2 = distance * distance;
    if distance < p.crossover() {
        b * p.e_elec + b * p.eps_fs * d2
    } else {
        b * p.e_elec + b * p.eps_amp * d2 * d2
    }
}

pub fn rx_energy<T: Scalar>(bits: u64, p: &EnergyParams<T>) -> T {
    T::from_u64(bits).unwrap() * p.e_elec
}

pub fn overhear_energy<T: Scalar>(bits: u64, p: &EnergyParams<T>) -> T {
    T::from_u64(bits).unwrap() * p.e_h
}

pub fn aggregate_energy<T: Scalar>(bits: u64, messages: u64, p: &EnergyParams<T>) -> T {
    T::from_u64(bits).unwrap() * T::from_u64(messages).unwrap() * p.e_da
}

pub fn monitor_energy<T: Scalar>(seconds: T, p: &EnergyParams<T>) -> T {
    seconds * p.e_m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_examples() {
        assert_relative_eq!(stationary_bad_prob(1.0, 9.0).unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(stationary_bad_prob(3.0, 7.0).unwrap(), 0.3, max_relative = 1e-12);
        assert_eq!(stationary_bad_prob(4.0, 4.0).unwrap(), 0.5);
        assert!(stationary_bad_prob(0.0, 0.0).is_err());
    }

    #[test]
    fn channel_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let always = ChannelPhase { alpha0: 0.0, alpha1: 3.0, start_round: 0 };
        let never = ChannelPhase { alpha0: 3.0, alpha1: 0.0, start_round: 0 };
        assert!((0..1000).all(|_| channel_ok(&always, &mut rng)));
        assert!((0..1000).all(|_| !channel_ok(&never, &mut rng)));
    }

    #[test]
    fn channel_bad_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phase = ChannelPhase::new(1.0, 9.0, 0).unwrap();
        let n = 1_000_000;
        let bad = (0..n).filter(|_| !channel_ok(&phase, &mut rng)).count();
        assert!((bad as f64 / n as f64 - 0.1).abs() < 0.005);
    }

    #[test]
    fn phase_lookup() {
        let s = [
            ChannelPhase { alpha0: 1.0, alpha1: 9.0, start_round: 0 },
            ChannelPhase { alpha0: 2.0, alpha1: 8.0, start_round: 10 },
        ];
        assert_eq!(phase_at(&s, 9).alpha0, 1.0);
        assert_eq!(phase_at(&s, 10).alpha0, 2.0);
        assert_eq!(phase_at(&s, 1000).alpha0, 2.0);
    }

    #[test]
    fn energy_examples() {
        let p = EnergyParams::<f64>::default();
        assert_relative_eq!(tx_energy(3000, 0.0, &p), 1.5e-4, max_relative = 1e-9);
        assert_relative_eq!(tx_energy(300, 25.0, &p), 1.6875e-5, max_relative = 1e-9);
        assert_relative_eq!(p.crossover(), 87.705_801_9, max_relative = 1e-8);
        let d0 = p.crossover();
        let fs = 3000.0 * p.e_elec + 3000.0 * p.eps_fs * d0 * d0;
        let mp = 3000.0 * p.e_elec + 3000.0 * p.eps_amp * d0.powi(4);
        assert_relative_eq!(fs, mp, max_relative = 1e-9);
        assert_relative_eq!(rx_energy(3000, &p), 1.5e-4, max_relative = 1e-9);
        assert_relative_eq!(overhear_energy(3000, &p), 1.5e-5, max_relative = 1e-9);
        assert_relative_eq!(aggregate_energy(3000, 4, &p), 6e-5, max_relative = 1e-9);
        assert_eq!(monitor_energy(0.0, &p), 0.0);
    }

    proptest! {
        #[test]
        fn tx_energy_monotone(a in 0.0f64..300.0, b in 0.0f64..300.0) {
            let p = EnergyParams::<f64>::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(tx_energy(3000, lo, &p) <= tx_energy(3000, hi, &p) * (1.0 + 1e-12));
        }
    }
}

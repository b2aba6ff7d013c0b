//! Active cooperative labelling: each device drives a neighbour through a
//! malicious-labelled and a normal-labelled forwarding session per round and
//! learns standard trust clouds for both behaviours from what it overhears.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{DropSet, TrustCloud};
use crate::error::{Error, Result};
use crate::inference::{EvidenceWindow, ForwardingEvent, TrustEstimator};
use crate::medium::{channel_ok, ChannelPhase};
use crate::scalar::Scalar;

/// The pair of population-level clouds a device classifies against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardClouds<T> {
    pub malicious: TrustCloud<T>,
    pub normal: TrustCloud<T>,
}

impl<T: Scalar> StandardClouds<T> {
    pub fn boundary_ok(&self) -> bool {
        self.malicious.ex < self.normal.ex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams<T> {
    /// Packets forwarded per label per round.
    pub n_f: usize,
    /// Drop probability of a malicious-labelled router.
    pub p_dp: T,
    /// Delay probability of a malicious-labelled router.
    pub p_dy: T,
    /// Longest malicious delay, seconds; also the overhearing window.
    pub max_dur: T,
    pub max_drp: usize,
    pub max_tr: usize,
}

impl<T: Scalar> Default for TrainingParams<T> {
    fn default() -> Self {
        Self {
            n_f: 20,
            p_dp: T::lit(0.05),
            p_dy: T::lit(0.05),
            max_dur: T::lit(10.0),
            max_drp: 100,
            max_tr: 20,
        }
    }
}

/// Transmissions performed during one training round, for energy charging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainingTraffic {
    pub initiator_tx: u32,
    pub initiator_overhear: u32,
    pub router_rx: u32,
    pub router_tx: u32,
    pub destination_rx: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRound<T> {
    pub router: usize,
    pub destination: usize,
    pub malicious: Vec<T>,
    pub normal: Vec<T>,
    pub traffic: TrainingTraffic,
}

/// Outcome of one packet handed to the router, as the initiator records it.
fn training_packet<T: Scalar, R: Rng + ?Sized>(
    malicious_label: bool,
    phase: &ChannelPhase,
    params: &TrainingParams<T>,
    traffic: &mut TrainingTraffic,
    rng: &mut R,
) -> ForwardingEvent {
    traffic.initiator_tx += 1;
    traffic.initiator_overhear += 1;
    if !channel_ok(phase, rng) {
        // router never received it, so nothing is forwarded
        return ForwardingEvent::Dropped;
    }
    traffic.router_rx += 1;
    let mut delayed = false;
    if malicious_label {
        if T::unit(rng) < params.p_dp {
            return ForwardingEvent::Dropped;
        }
        if T::unit(rng) < params.p_dy {
            // the delay lies in (0, max_dur] and the initiator listens for
            // max_dur, so it is always observed as a delay
            delayed = true;
        }
    }
    traffic.router_tx += 1;
    if channel_ok(phase, rng) {
        traffic.destination_rx += 1;
    } else {
        // no reply from the destination: one retransmission after timeout
        traffic.router_tx += 1;
        if channel_ok(phase, rng) {
            traffic.destination_rx += 1;
        }
        delayed = true;
    }
    if !channel_ok(phase, rng) {
        return ForwardingEvent::Dropped;
    }
    if delayed {
        ForwardingEvent::ForwardedDelayed
    } else {
        ForwardingEvent::ForwardedTimely
    }
}

fn labelled_session<T: Scalar, R: Rng + ?Sized, E: TrustEstimator<T>>(
    malicious_label: bool,
    phase: &ChannelPhase,
    params: &TrainingParams<T>,
    estimator: &E,
    traffic: &mut TrainingTraffic,
    rng: &mut R,
) -> Vec<T> {
    let mut window = EvidenceWindow::default();
    (0..params.n_f)
        .map(|_| {
            window = window.record(training_packet(malicious_label, phase, params, traffic, rng));
            estimator.estimate(&window.attributes().expect("window has evidence"))
        })
        .collect()
}

/// One training round for `initiator`: pick a router and a destination from
/// its neighbourhood, run the malicious-labelled session then the
/// normal-labelled one, and return the `n_f` trust values of each.
pub fn run_training_round<T, R, E>(
    initiator: usize,
    neighborhood: &[usize],
    phase: &ChannelPhase,
    params: &TrainingParams<T>,
    estimator: &E,
    rng: &mut R,
) -> Result<TrainingRound<T>>
where
    T: Scalar,
    R: Rng + ?Sized,
    E: TrustEstimator<T>,
{
    let candidates: Vec<usize> = neighborhood.iter().copied().filter(|&d| d != initiator).collect();
    if candidates.len() < 2 {
        return Err(Error::NoNeighbor { device: initiator });
    }
    let router = *candidates.choose(rng).unwrap();
    let destination = loop {
        let d = *candidates.choose(rng).unwrap();
        if d != router {
            break d;
        }
    };
    let mut traffic = TrainingTraffic::default();
    let malicious = labelled_session(true, phase, params, estimator, &mut traffic, rng);
    let normal = labelled_session(false, phase, params, estimator, &mut traffic, rng);
    Ok(TrainingRound { router, destination, malicious, normal, traffic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState<T> {
    pub malicious_drops: DropSet<T>,
    pub normal_drops: DropSet<T>,
    pub rounds_done: usize,
    pub initial_built: bool,
    pub stc_m: Option<TrustCloud<T>>,
    pub stc_n: Option<TrustCloud<T>>,
    max_tr: usize,
}

impl<T: Scalar> TrainingState<T> {
    pub fn new(params: &TrainingParams<T>) -> Self {
        Self {
            malicious_drops: DropSet::new(params.max_drp.max(1)),
            normal_drops: DropSet::new(params.max_drp.max(1)),
            rounds_done: 0,
            initial_built: false,
            stc_m: None,
            stc_n: None,
            max_tr: params.max_tr,
        }
    }

    pub fn clouds(&self) -> Option<StandardClouds<T>> {
        Some(StandardClouds { malicious: self.stc_m?, normal: self.stc_n? })
    }

    pub fn forced(&self) -> bool {
        self.rounds_done >= self.max_tr && !self.clouds().is_some_and(|c| c.boundary_ok())
    }
}

/// Feeds one round of drops into the training state. Clouds are first built
/// when both drop sets fill, then re-estimated after every later round.
pub fn training_step<T: Scalar>(
    state: &mut TrainingState<T>,
    malicious: &[T],
    normal: &[T],
) -> Result<()> {
    if state.rounds_done >= state.max_tr {
        return Err(Error::TrainingExhausted { max_rounds: state.max_tr });
    }
    state.malicious_drops.extend(malicious.iter().copied());
    state.normal_drops.extend(normal.iter().copied());
    state.rounds_done += 1;
    if state.initial_built || (state.malicious_drops.is_full() && state.normal_drops.is_full()) {
        state.stc_m = Some(state.malicious_drops.backward_cloud()?);
        state.stc_n = Some(state.normal_drops.backward_cloud()?);
        state.initial_built = true;
    }
    Ok(())
}

pub fn training_complete<T: Scalar>(state: &TrainingState<T>) -> bool {
    state.clouds().is_some_and(|c| c.boundary_ok()) || state.rounds_done >= state.max_tr
}

/// Component-wise mean of `own` and every received recommendation.
pub fn merge_recommendations<T: Scalar>(
    own: &StandardClouds<T>,
    received: &[StandardClouds<T>],
) -> StandardClouds<T> {
    let n = T::from_usize(received.len() + 1).unwrap();
    let mean = |pick: fn(&StandardClouds<T>) -> &TrustCloud<T>| {
        let (mut ex, mut en, mut he) = (pick(own).ex, pick(own).en, pick(own).he);
        for r in received {
            let c = pick(r);
            ex = ex + c.ex;
            en = en + c.en;
            he = he + c.he;
        }
        TrustCloud { ex: ex / n, en: en / n, he: he / n }
    };
    StandardClouds { malicious: mean(|s| &s.malicious), normal: mean(|s| &s.normal) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::It2Fls;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(ex: f64, en: f64, he: f64) -> TrustCloud<f64> {
        TrustCloud { ex, en, he }
    }

    fn sc(m: TrustCloud<f64>, n: TrustCloud<f64>) -> StandardClouds<f64> {
        StandardClouds { malicious: m, normal: n }
    }

    #[test]
    fn perfect_channel_normal_session_is_high() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = TrainingParams::<f64>::default();
        let round = run_training_round(
            0,
            &[1, 2, 3],
            &ChannelPhase::perfect(),
            &params,
            &It2Fls::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(round.normal.len(), 20);
        assert_eq!(round.malicious.len(), 20);
        assert!(round.normal.iter().all(|&t| t >= 0.9));
        assert_ne!(round.router, round.destination);
        assert_ne!(round.router, 0);
    }

    #[test]
    fn dead_channel_hides_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dead = ChannelPhase { alpha0: 1.0, alpha1: 0.0, start_round: 0 };
        let r = run_training_round(0, &[1, 2], &dead, &TrainingParams::<f64>::default(), &It2Fls::default(), &mut rng)
            .unwrap();
        assert_eq!(r.malicious, r.normal);
        let all_dropped: f64 = It2Fls::default()
            .estimate(&EvidenceWindow { sent: 20, forwarded: 0, timely: 0 }.attributes().unwrap());
        assert!(r.normal.iter().all(|&t| t == all_dropped));
        assert_eq!(r.traffic.router_rx, 0);
    }

    #[test]
    fn lonely_device_cannot_train() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = run_training_round::<f64, _, _>(
            5,
            &[5, 6],
            &ChannelPhase::perfect(),
            &TrainingParams::default(),
            &It2Fls::default(),
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, Error::NoNeighbor { device: 5 });
    }

    #[test]
    fn malicious_label_scores_lower_on_average() {
        let phase = ChannelPhase::new(1.0, 9.0, 0).unwrap();
        let params = TrainingParams::<f64>::default();
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = 0.0;
            let mut n = 0.0;
            for _ in 0..5 {
                let r = run_training_round(0, &[1, 2, 3], &phase, &params, &It2Fls::default(), &mut rng)
                    .unwrap();
                m += r.malicious.iter().sum::<f64>();
                n += r.normal.iter().sum::<f64>();
            }
            if m < n {
                wins += 1;
            }
        }
        assert!(wins > 50, "malicious scored lower in {wins}/100 seeds");
    }

    #[test]
    fn initial_clouds_after_five_rounds() {
        let params = TrainingParams::<f64>::default();
        let mut st = TrainingState::new(&params);
        let m = vec![0.3; 20];
        let n: Vec<f64> = (0..20).map(|i| 0.7 + i as f64 * 0.01).collect();
        for _ in 0..4 {
            training_step(&mut st, &m, &n).unwrap();
        }
        assert!(!st.initial_built);
        assert!(!training_complete(&st));
        training_step(&mut st, &m, &n).unwrap();
        assert!(st.initial_built);
        assert!(training_complete(&st));
    }

    #[test]
    fn round_limit() {
        let params = TrainingParams::<f64>::default();
        let mut st = TrainingState::new(&params);
        for _ in 0..20 {
            training_step(&mut st, &[0.9; 20], &[0.1; 20]).unwrap();
        }
        assert!(training_complete(&st));
        assert!(st.forced());
        assert_eq!(
            training_step(&mut st, &[0.5], &[0.5]).unwrap_err(),
            Error::TrainingExhausted { max_rounds: 20 }
        );
    }

    #[test]
    fn completion_rules() {
        let params = TrainingParams::<f64>::default();
        let mut st = TrainingState::new(&params);
        st.initial_built = true;
        st.rounds_done = 10;
        st.stc_m = Some(c(0.3, 0.1, 0.0));
        st.stc_n = Some(c(0.8, 0.1, 0.0));
        assert!(training_complete(&st));
        st.stc_m = Some(c(0.8, 0.1, 0.0));
        st.stc_n = Some(c(0.3, 0.1, 0.0));
        assert!(!training_complete(&st));
        st.rounds_done = 20;
        assert!(training_complete(&st));
        let zero = TrainingParams { max_tr: 0, ..params };
        assert!(training_complete(&TrainingState::<f64>::new(&zero)));
    }

    #[test]
    fn merge_examples() {
        let own = sc(c(0.3, 0.1, 0.02), c(0.7, 0.1, 0.02));
        assert_eq!(merge_recommendations(&own, &[]), own);
        let other = sc(c(0.5, 0.2, 0.04), c(0.9, 0.3, 0.06));
        let m = merge_recommendations(&own, &[other]);
        assert_relative_eq!(m.malicious.ex, 0.4, max_relative = 1e-12);
        assert_relative_eq!(m.malicious.en, 0.15, max_relative = 1e-12);
        assert_relative_eq!(m.malicious.he, 0.03, max_relative = 1e-12);
        let same = merge_recommendations(&own, &[own, own]);
        assert_relative_eq!(same.normal.ex, own.normal.ex, max_relative = 1e-12);
        assert_relative_eq!(same.malicious.en, own.malicious.en, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn merge_ignores_order(xs in prop::collection::vec((0.0f64..1.0, 0.0f64..0.3, 0.0f64..0.1), 1..8)) {
            let clouds: Vec<_> = xs.iter().map(|&(a, b, d)| sc(c(a * 0.5, b, d), c(a, b, d))).collect();
            let own = clouds[0];
            let fwd = merge_recommendations(&own, &clouds[1..]);
            let mut rev = clouds[1..].to_vec();
            rev.reverse();
            let bwd = merge_recommendations(&own, &rev);
            prop_assert!((fwd.normal.ex - bwd.normal.ex).abs() < 1e-12);
            prop_assert!((fwd.malicious.en - bwd.malicious.en).abs() < 1e-12);
        }
    }
}

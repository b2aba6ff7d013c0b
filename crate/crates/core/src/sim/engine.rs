//! Scenario construction and the training-then-rounds lifecycle.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::metrics::{MetricsLog, RoundRecord, TrainingRecord};
use crate::error::Result;
use crate::medium::{overhear_energy, phase_at, rx_energy, tx_energy, ChannelPhase};
use crate::protocol::{AttackerProfile, DeviceState, Network};
use crate::training::{
    merge_recommendations, run_training_round, training_complete, training_step, StandardClouds, TrainingState,
};

pub type SimRng = ChaCha8Rng;

/// Random stream `stream` of the master seed.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Places devices uniformly, picks the malicious set uniformly and splits it
/// into attacker classes by the configured mix.
pub fn build_scenario(config: &ScenarioConfig, rng: &mut impl Rng) -> Result<Network> {
    config.validate()?;
    let s = &config.scenario;
    let n = s.devices;
    let e0 = config.medium_models.energy.e0;
    let (thr, max_drp) = (config.trust_runtime.thr_drp, config.trust_training.max_drp);
    let mut devices: Vec<DeviceState> = (0..n)
        .map(|id| {
            let x = rng.random::<f64>() * s.area_width;
            let y = rng.random::<f64>() * s.area_height;
            DeviceState::new(id, x, y, e0, AttackerProfile::Honest, thr, max_drp)
        })
        .collect();
    let mut chosen = sample(rng, n, config.malicious_count()).into_vec();
    chosen.shuffle(rng);
    let [g, a, _] = config.attacker_counts();
    for (i, id) in chosen.into_iter().enumerate() {
        devices[id].profile = if i < g {
            AttackerProfile::Generic
        } else if i < g + a {
            AttackerProfile::Advanced
        } else {
            AttackerProfile::Super
        };
    }
    Ok(Network::new(devices, config.protocol_params()))
}

/// Active training on every device, then exchange of standard clouds with
/// neighbours. Returns one record per device.
pub fn run_training(net: &mut Network, config: &ScenarioConfig, phase: &ChannelPhase, rng: &mut impl Rng) -> Vec<TrainingRecord> {
    let params = config.training_params();
    let bits = config.medium_models.training_bits;
    let ctl = config.medium_models.control_bits;
    let e = config.medium_models.energy;
    let estimator = *net.estimator();
    let n = net.devices.len();
    let mut own: Vec<Option<StandardClouds<f64>>> = vec![None; n];
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let before: f64 = net.devices.iter().map(|d| d.energy).sum();
        let mut state = TrainingState::new(&params);
        while net.devices[i].alive && !training_complete(&state) {
            let Ok(round) = run_training_round(i, &net.neighbors[i], phase, &params, &estimator, rng) else {
                break;
            };
            let t = round.traffic;
            let d_ij = net.devices[i].distance(&net.devices[round.router]);
            let d_jk = net.devices[round.router].distance(&net.devices[round.destination]);
            net.devices[i].charge(
                t.initiator_tx as f64 * tx_energy(bits, d_ij, &e) + t.initiator_overhear as f64 * overhear_energy(bits, &e),
                0,
            );
            net.devices[round.router]
                .charge(t.router_rx as f64 * rx_energy(bits, &e) + t.router_tx as f64 * tx_energy(bits, d_jk, &e), 0);
            net.devices[round.destination].charge(t.destination_rx as f64 * rx_energy(bits, &e), 0);
            if training_step(&mut state, &round.malicious, &round.normal).is_err() {
                break;
            }
        }
        own[i] = state.clouds();
        let after: f64 = net.devices.iter().map(|d| d.energy).sum();
        records.push(TrainingRecord {
            device: i,
            rounds_used: state.rounds_done,
            forced: !state.clouds().is_some_and(|c| c.boundary_ok()),
            boundary_ok: false,
            malicious: None,
            normal: None,
            energy_spent: before - after,
        });
    }

    for i in 0..n {
        if own[i].is_some() && net.devices[i].alive {
            let radius = net.params.radius;
            net.devices[i].charge(tx_energy(ctl, radius, &e), 0);
            for k in 0..net.neighbors[i].len() {
                let j = net.neighbors[i][k];
                net.devices[j].charge(rx_energy(ctl, &e), 0);
            }
        }
    }
    for i in 0..n {
        let received: Vec<StandardClouds<f64>> = net.neighbors[i].iter().filter_map(|&j| own[j]).collect();
        let merged = match (&own[i], received.split_first()) {
            (Some(mine), _) => Some(merge_recommendations(mine, &received)),
            (None, Some((first, rest))) => Some(merge_recommendations(first, rest)),
            (None, None) => None,
        };
        let rec = &mut records[i];
        rec.boundary_ok = merged.is_some_and(|c| c.boundary_ok());
        rec.malicious = merged.map(|c| c.malicious);
        rec.normal = merged.map(|c| c.normal);
        net.devices[i].standard = merged;
    }
    records
}

fn first_honest_death(net: &Network) -> Option<usize> {
    net.devices.iter().filter(|d| !d.profile.is_malicious()).filter_map(|d| d.death_round).min()
}

/// Runs stream `stream` of the configured master seed.
pub fn run_simulation_stream(config: &ScenarioConfig, stream: u64) -> Result<MetricsLog> {
    let mut rng = stream_rng(config.scenario.seed, stream);
    let phases = config.channel_phases()?;
    let mut net = build_scenario(config, &mut rng)?;
    let training = run_training(&mut net, config, phase_at(&phases, 0), &mut rng);
    let mut log = MetricsLog {
        rounds: Vec::with_capacity(config.scenario.max_rounds),
        max_rounds: config.scenario.max_rounds,
        rounds_per_cycle: config.scenario.rounds_per_cycle,
        first_honest_death: first_honest_death(&net),
        training,
    };
    let mut energy: f64 = net.devices.iter().map(|d| d.energy).sum();
    for round in 0..config.scenario.max_rounds {
        if net.alive_count() == 0 {
            break;
        }
        let phase = phase_at(&phases, round);
        let outcome = net.run_round(round, phase, &mut rng);
        let now: f64 = net.devices.iter().map(|d| d.energy).sum();
        log.rounds.push(RoundRecord::from_outcome(round, phase.bad_prob(), &outcome, &net, energy - now));
        energy = now;
        if log.first_honest_death.is_none() {
            log.first_honest_death = first_honest_death(&net);
        }
    }
    Ok(log)
}

/// Scenario construction and training only, on stream `stream`.
pub fn run_training_only(config: &ScenarioConfig, stream: u64) -> Result<Vec<TrainingRecord>> {
    let mut rng = stream_rng(config.scenario.seed, stream);
    let phases = config.channel_phases()?;
    let mut net = build_scenario(config, &mut rng)?;
    Ok(run_training(&mut net, config, phase_at(&phases, 0), &mut rng))
}

/// One run on the first stream of the master seed.
pub fn run_simulation(config: &ScenarioConfig) -> Result<MetricsLog> {
    run_simulation_stream(config, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_counts_and_bounds() {
        let cfg = ScenarioConfig::new(100.0, 100.0, 100, 0.2);
        let net = build_scenario(&cfg, &mut stream_rng(7, 0)).unwrap();
        let count = |p| net.devices.iter().filter(|d| d.profile == p).count();
        assert_eq!(count(AttackerProfile::Generic), 6);
        assert_eq!(count(AttackerProfile::Advanced), 8);
        assert_eq!(count(AttackerProfile::Super), 6);
        assert!(net.devices.iter().all(|d| (0.0..=100.0).contains(&d.x) && (0.0..=100.0).contains(&d.y)));
        assert!(net.devices.iter().all(|d| d.energy == 1.0 && d.alive));

        let honest = build_scenario(&ScenarioConfig::new(100.0, 100.0, 100, 0.0), &mut stream_rng(7, 0)).unwrap();
        assert!(honest.devices.iter().all(|d| d.profile == AttackerProfile::Honest));
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        let c: u64 = stream_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}

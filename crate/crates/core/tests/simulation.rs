use rand::SeedableRng;
use trustcloud::medium::ChannelPhase;
use trustcloud::protocol::ClassifierKind;
use trustcloud::sim::{
    build_scenario, metric_decision_accuracy, metric_malicious_clusters, metric_network_lifetime,
    run_simulation, run_training_only, stream_rng, ScenarioConfig,
};

fn small(frac: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(80.0, 80.0, 60, frac);
    cfg.scenario.max_rounds = 400;
    cfg
}

#[test]
fn energy_only_goes_down_and_dead_devices_stay_put() {
    let cfg = small(0.3);
    let mut rng = stream_rng(cfg.scenario.seed, 0);
    let mut net = build_scenario(&cfg, &mut rng).unwrap();
    let phases = cfg.channel_phases().unwrap();
    let e0 = cfg.medium_models.energy.e0;
    for d in net.devices.iter_mut() {
        d.energy = 0.02 + 0.0005 * d.id as f64;
    }
    let mut prev: Vec<f64> = net.devices.iter().map(|d| d.energy).collect();
    for r in 0..300 {
        let was_dead: Vec<bool> = net.devices.iter().map(|d| !d.alive).collect();
        let out = net.run_round(r, &phases[0], &mut rng);
        for (i, d) in net.devices.iter().enumerate() {
            assert!(d.energy <= prev[i], "device {i} gained energy in round {r}");
            assert!(d.energy >= 0.0 && d.energy <= e0);
            if was_dead[i] {
                assert_eq!(d.energy, prev[i], "dead device {i} was charged");
                assert!(!out.transfers.iter().any(|t| t.member == i), "dead device {i} sent data");
            }
            prev[i] = d.energy;
        }
        let mut seen = vec![0; net.devices.len()];
        for ms in out.clusters.values() {
            for m in ms {
                seen[*m] += 1;
            }
        }
        for m in &out.unclustered {
            seen[*m] += 1;
        }
        for (i, n) in seen.iter().enumerate() {
            assert!(*n <= 1, "device {i} in {n} clusters");
        }
    }
    assert!(net.devices.iter().any(|d| !d.alive), "budget was meant to exhaust some devices");
}

#[test]
fn packets_accounted_once() {
    let log = run_simulation(&small(0.3)).unwrap();
    for r in &log.rounds {
        assert_eq!(r.timely + r.delayed + r.dropped, r.packets, "round {}", r.round);
        assert!(r.lost_in_channel <= r.dropped + r.delayed);
        assert_eq!(r.correct + r.false_alarms + r.missed, r.decisions);
    }
    for w in log.rounds.windows(2) {
        assert!(w[1].round > w[0].round);
    }
}

#[test]
fn oracle_classifier_is_always_right() {
    let mut cfg = small(0.3);
    cfg.trust_runtime.classifier = ClassifierKind::Oracle;
    let log = run_simulation(&cfg).unwrap();
    assert_eq!(metric_decision_accuracy(&log).unwrap(), 1.0);
}

#[test]
fn cycle_series_length() {
    let mut cfg = small(0.2);
    cfg.scenario.max_rounds = 420;
    let log = run_simulation(&cfg).unwrap();
    let expected = log.rounds.len().div_ceil(50);
    assert_eq!(metric_malicious_clusters(&log).len(), expected);
    let lt = metric_network_lifetime(&log);
    assert!(lt.rounds > 0 && lt.rounds <= 420);
}

#[test]
fn no_malicious_no_attacks() {
    let log = run_simulation(&small(0.0)).unwrap();
    assert!(log.rounds.iter().all(|r| r.attack_drops + r.attack_delays == 0));
}

#[test]
fn same_seed_same_log() {
    let cfg = small(0.2);
    assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
    let mut other = cfg.clone();
    other.scenario.seed += 1;
    assert_ne!(run_simulation(&cfg).unwrap(), run_simulation(&other).unwrap());
}

#[test]
fn training_separates_labels_across_seeds() {
    let (mut ok, mut total) = (0usize, 0usize);
    for seed in 0..50 {
        let mut cfg = ScenarioConfig::new(100.0, 100.0, 100, 0.2);
        cfg.scenario.seed = seed;
        for r in run_training_only(&cfg, 0).unwrap() {
            assert!(r.rounds_used <= cfg.trust_training.max_tr);
            total += 1;
            ok += r.boundary_ok as usize;
        }
    }
    let frac = ok as f64 / total as f64;
    assert!(frac >= 0.95, "boundary satisfied for {frac}");
}

#[test]
fn training_edge_cases() {
    let mut cfg = ScenarioConfig::new(100.0, 100.0, 60, 0.2);
    cfg.trust_training.max_tr = 0;
    let recs = run_training_only(&cfg, 0).unwrap();
    assert!(recs.iter().all(|r| r.forced));

    let mut cfg = ScenarioConfig::new(100.0, 100.0, 60, 0.2);
    cfg.medium_models.phases = Some(vec![ChannelPhase::perfect()]);
    let recs = run_training_only(&cfg, 0).unwrap();
    assert!(recs.iter().all(|r| r.boundary_ok));
}

#[test]
fn malicious_class_split() {
    let cfg = ScenarioConfig::new(100.0, 100.0, 100, 0.2);
    let net = build_scenario(&cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(5)).unwrap();
    let count = |name: &str| net.devices.iter().filter(|d| d.profile.name() == name).count();
    assert_eq!((count("generic"), count("advanced"), count("super")), (6, 8, 6));
}

#[test]
fn malicious_devices_flagged_by_round_sixty() {
    use trustcloud::medium::phase_at;
    use trustcloud::runtime::Verdict;
    use trustcloud::sim::run_training;
    let mut flagged = 0;
    for seed in 0..20 {
        let mut cfg = ScenarioConfig::new(100.0, 100.0, 100, 0.2);
        cfg.scenario.seed = seed;
        let mut rng = stream_rng(seed, 0);
        let phases = cfg.channel_phases().unwrap();
        let mut net = build_scenario(&cfg, &mut rng).unwrap();
        run_training(&mut net, &cfg, phase_at(&phases, 0), &mut rng);
        for r in 0..=60 {
            net.run_round(r, phase_at(&phases, r), &mut rng);
        }
        let hit = net.devices.iter().any(|obs| {
            obs.verdicts
                .iter()
                .any(|(t, v)| *v == Verdict::Malicious && net.devices[*t].profile.is_malicious())
        });
        flagged += hit as usize;
    }
    assert!(flagged > 10, "only {flagged} of 20 seeds flagged a malicious device");
}

//! Per-round records and the evaluation metrics derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ClusterRoundOutcome, Network, PacketFate};
use crate::runtime::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub bad_prob: f64,
    pub alive: usize,
    pub heads: usize,
    /// Heads with at least one member.
    pub clusters: usize,
    /// Clusters with at least one member whose head is malicious.
    pub malicious_clusters: usize,
    pub unclustered: usize,
    pub attack_drops: usize,
    pub attack_delays: usize,
    pub packets: usize,
    pub timely: usize,
    pub delayed: usize,
    pub dropped: usize,
    pub lost_in_channel: usize,
    pub decisions: usize,
    pub correct: usize,
    /// Honest targets judged malicious.
    pub false_alarms: usize,
    /// Malicious targets judged normal.
    pub missed: usize,
    pub normal_verdicts: usize,
    pub standard_updates: usize,
    /// Energy spent this round, joules.
    pub energy_spent: f64,
    pub residual_energy: f64,
}

impl RoundRecord {
    pub fn from_outcome(round: usize, bad_prob: f64, outcome: &ClusterRoundOutcome, net: &Network, spent: f64) -> Self {
        let mut r = RoundRecord { round, bad_prob, ..Default::default() };
        r.alive = net.alive_count();
        r.heads = outcome.clusters.len();
        for (h, members) in &outcome.clusters {
            if !members.is_empty() {
                r.clusters += 1;
                if net.devices[*h].profile.is_malicious() {
                    r.malicious_clusters += 1;
                }
            }
        }
        r.unclustered = outcome.unclustered.len();
        (r.attack_drops, r.attack_delays) = outcome.attacks();
        for t in &outcome.transfers {
            r.packets += 1;
            match t.fate {
                PacketFate::Timely => r.timely += 1,
                PacketFate::Delayed => r.delayed += 1,
                PacketFate::Dropped => r.dropped += 1,
            }
            if t.lost_in_channel {
                r.lost_in_channel += 1;
            }
        }
        for d in &outcome.decisions {
            r.decisions += 1;
            let says_malicious = d.verdict == Verdict::Malicious;
            if says_malicious == d.target_malicious {
                r.correct += 1;
            } else if says_malicious {
                r.false_alarms += 1;
            } else {
                r.missed += 1;
            }
            if !says_malicious {
                r.normal_verdicts += 1;
            }
        }
        r.standard_updates = outcome.standard_updates;
        r.energy_spent = spent;
        r.residual_energy = net.devices.iter().map(|d| d.energy).sum();
        r
    }
}

/// Network lifetime with a flag set when no honest device died.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifetime {
    pub rounds: usize,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rounds: Vec<RoundRecord>,
    pub max_rounds: usize,
    pub rounds_per_cycle: usize,
    /// Round in which the first honest device died.
    pub first_honest_death: Option<usize>,
    pub training: Vec<TrainingRecord>,
}

/// Training outcome for one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub device: usize,
    pub rounds_used: usize,
    pub forced: bool,
    pub boundary_ok: bool,
    /// Own clouds merged with neighbour recommendations.
    pub malicious: Option<crate::cloud::TrustCloud<f64>>,
    pub normal: Option<crate::cloud::TrustCloud<f64>>,
    pub energy_spent: f64,
}

/// Rounds until the first honest device dies; censored at `max_rounds`.
pub fn metric_network_lifetime(log: &MetricsLog) -> Lifetime {
    match log.first_honest_death {
        Some(r) => Lifetime { rounds: r, censored: false },
        None => Lifetime { rounds: log.max_rounds, censored: true },
    }
}

pub fn metric_timely_rate(log: &MetricsLog) -> Result<f64> {
    let timely: usize = log.rounds.iter().map(|r| r.timely).sum();
    let needed: usize = log.rounds.iter().map(|r| r.packets - r.lost_in_channel).sum();
    if needed == 0 {
        return Err(Error::UndefinedMetric("timely rate: no packet needed forwarding"));
    }
    Ok(timely as f64 / needed as f64)
}

pub fn metric_decision_accuracy(log: &MetricsLog) -> Result<f64> {
    let total: usize = log.rounds.iter().map(|r| r.decisions).sum();
    let correct: usize = log.rounds.iter().map(|r| r.correct).sum();
    if total == 0 {
        return Err(Error::UndefinedMetric("accuracy: no classification decisions"));
    }
    Ok(correct as f64 / total as f64)
}

pub fn metric_total_attacks(log: &MetricsLog) -> usize {
    log.rounds.iter().map(|r| r.attack_drops + r.attack_delays).sum()
}

/// Mean malicious-cluster count per cycle; the last cycle may be partial.
pub fn metric_malicious_clusters(log: &MetricsLog) -> Vec<f64> {
    let size = log.rounds_per_cycle.max(1);
    log.rounds
        .chunks(size)
        .map(|c| c.iter().map(|r| r.malicious_clusters as f64).sum::<f64>() / c.len() as f64)
        .collect()
}

/// The five scalar summary metrics of one run, `NaN` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lifetime: f64,
    pub lifetime_censored: bool,
    pub timely_rate: f64,
    pub accuracy: f64,
    pub total_attacks: f64,
    pub mean_malicious_clusters: f64,
}

impl RunSummary {
    pub const NAMES: [&'static str; 5] =
        ["network_lifetime", "timely_rate", "decision_accuracy", "total_attacks", "malicious_clusters"];

    pub fn of(log: &MetricsLog) -> Self {
        let lt = metric_network_lifetime(log);
        let series = metric_malicious_clusters(log);
        let mean_mc = if series.is_empty() { f64::NAN } else { series.iter().sum::<f64>() / series.len() as f64 };
        Self {
            lifetime: lt.rounds as f64,
            lifetime_censored: lt.censored,
            timely_rate: metric_timely_rate(log).unwrap_or(f64::NAN),
            accuracy: metric_decision_accuracy(log).unwrap_or(f64::NAN),
            total_attacks: metric_total_attacks(log) as f64,
            mean_malicious_clusters: mean_mc,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [self.lifetime, self.timely_rate, self.accuracy, self.total_attacks, self.mean_malicious_clusters]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_with(rounds: Vec<RoundRecord>) -> MetricsLog {
        MetricsLog { rounds, max_rounds: 1000, rounds_per_cycle: 50, ..Default::default() }
    }

    #[test]
    fn lifetime_readout_and_censoring() {
        let mut log = log_with(vec![]);
        log.first_honest_death = Some(412);
        assert_eq!(metric_network_lifetime(&log), Lifetime { rounds: 412, censored: false });
        log.first_honest_death = None;
        assert_eq!(metric_network_lifetime(&log), Lifetime { rounds: 1000, censored: true });
    }

    #[test]
    fn timely_ratio() {
        let r = RoundRecord { packets: 1000, timely: 900, delayed: 50, dropped: 50, ..Default::default() };
        assert!((metric_timely_rate(&log_with(vec![r])).unwrap() - 0.9).abs() < 1e-12);
        let lost = RoundRecord { packets: 10, dropped: 10, lost_in_channel: 10, ..Default::default() };
        assert!(matches!(metric_timely_rate(&log_with(vec![lost])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn accuracy_needs_decisions() {
        assert!(metric_decision_accuracy(&log_with(vec![RoundRecord::default()])).is_err());
        let r = RoundRecord { decisions: 4, correct: 4, ..Default::default() };
        assert_eq!(metric_decision_accuracy(&log_with(vec![r])).unwrap(), 1.0);
    }

    #[test]
    fn cycle_series_length() {
        for total in [1usize, 49, 50, 51, 100, 137] {
            let rounds = (0..total).map(|i| RoundRecord { round: i, ..Default::default() }).collect();
            assert_eq!(metric_malicious_clusters(&log_with(rounds)).len(), total.div_ceil(50));
        }
    }
}

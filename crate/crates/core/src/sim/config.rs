//! Scenario files: TOML with one table per subsystem.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{ChannelPhase, EnergyParams};
use crate::protocol::{ClassifierKind, ProtocolParams};
use crate::runtime::ClassifyParams;
use crate::training::TrainingParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub medium_models: Medium,
    #[serde(default)]
    pub trust_training: Training,
    #[serde(default)]
    pub trust_runtime: Runtime,
    #[serde(default)]
    pub clustering_protocol: Clustering,
    /// Written by the reporter; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub area_width: f64,
    pub area_height: f64,
    pub devices: usize,
    pub malicious_fraction: f64,
    /// Generic, advanced and super shares of the malicious devices.
    #[serde(default = "default_mix")]
    pub attacker_mix: [f64; 3],
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_cycle")]
    pub rounds_per_cycle: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Sink position; the centre of the area when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink: Option<[f64; 2]>,
}

fn default_mix() -> [f64; 3] {
    [0.3, 0.4, 0.3]
}
fn default_max_rounds() -> usize {
    4000
}
fn default_cycle() -> usize {
    50
}
fn default_seed() -> u64 {
    42
}
fn default_replications() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Medium {
    pub data_bits: u64,
    pub control_bits: u64,
    pub training_bits: u64,
    /// Listening time per overheard packet, seconds.
    pub monitor_seconds: f64,
    /// `[alpha0, alpha1]` pairs spread evenly over `max_rounds`.
    pub schedule: Vec<[f64; 2]>,
    /// Explicit phases with start rounds; overrides `schedule` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<ChannelPhase>>,
    pub energy: EnergyParams<f64>,
}

impl Default for Medium {
    fn default() -> Self {
        Self {
            data_bits: 3000,
            control_bits: 300,
            training_bits: 300,
            monitor_seconds: 1.0,
            schedule: vec![[1.0, 9.0], [2.0, 8.0], [3.0, 7.0], [1.0, 9.0]],
            phases: None,
            energy: EnergyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    /// Neighbourhood radius R_n, metres.
    pub radius: f64,
    pub n_f: usize,
    pub p_dp: f64,
    pub p_dy: f64,
    pub max_dur: f64,
    pub max_drp: usize,
    pub max_tr: usize,
}

impl Default for Training {
    fn default() -> Self {
        let p = TrainingParams::<f64>::default();
        Self {
            radius: 25.0,
            n_f: p.n_f,
            p_dp: p.p_dp,
            p_dy: p.p_dy,
            max_dur: p.max_dur,
            max_drp: p.max_drp,
            max_tr: p.max_tr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Runtime {
    pub thr_drp: usize,
    pub n_drp: usize,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub classifier: ClassifierKind,
}

impl Default for Runtime {
    fn default() -> Self {
        let c = ClassifyParams::<f64>::default();
        Self { thr_drp: 20, n_drp: c.n_drp, alpha: 0.8, beta: 0.2, kappa: c.kappa, classifier: ClassifierKind::Cloud }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Clustering {
    pub p_ch: f64,
}

impl Default for Clustering {
    fn default() -> Self {
        Self { p_ch: 0.07 }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    check((0.0..=1.0).contains(&v), || format!("{name} must lie in [0, 1], got {v}"))
}

impl ScenarioConfig {
    /// A scenario with every optional table at its default.
    pub fn new(area_width: f64, area_height: f64, devices: usize, malicious_fraction: f64) -> Self {
        Self {
            scenario: Scenario {
                area_width,
                area_height,
                devices,
                malicious_fraction,
                attacker_mix: default_mix(),
                max_rounds: default_max_rounds(),
                rounds_per_cycle: default_cycle(),
                seed: default_seed(),
                replications: default_replications(),
                sink: None,
            },
            medium_models: Medium::default(),
            trust_training: Training::default(),
            trust_runtime: Runtime::default(),
            clustering_protocol: Clustering::default(),
            manifest: None,
        }
    }

    /// Parses and validates; syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        check(s.area_width > 0.0 && s.area_height > 0.0, || "scenario area must be positive".into())?;
        check(s.devices >= 1, || "scenario.devices must be at least 1".into())?;
        unit("scenario.malicious_fraction", s.malicious_fraction)?;
        check(s.attacker_mix.iter().all(|v| *v >= 0.0), || "scenario.attacker_mix shares must be non-negative".into())?;
        let mix: f64 = s.attacker_mix.iter().sum();
        check((mix - 1.0).abs() <= 1e-9, || format!("scenario.attacker_mix must sum to 1, got {mix}"))?;
        check(s.rounds_per_cycle >= 1, || "scenario.rounds_per_cycle must be at least 1".into())?;

        let m = &self.medium_models;
        m.energy.validate()?;
        check(m.monitor_seconds >= 0.0, || "medium_models.monitor_seconds must be non-negative".into())?;
        let phases = self.channel_phases()?;
        check(!phases.is_empty(), || "medium_models needs at least one channel phase".into())?;

        let t = &self.trust_training;
        check(t.radius > 0.0, || "trust_training.radius must be positive".into())?;
        unit("trust_training.p_dp", t.p_dp)?;
        unit("trust_training.p_dy", t.p_dy)?;
        check(t.max_drp >= 2, || "trust_training.max_drp must be at least 2".into())?;
        check(t.max_dur > 0.0, || "trust_training.max_dur must be positive".into())?;

        let r = &self.trust_runtime;
        check(r.thr_drp >= 2, || "trust_runtime.thr_drp must be at least 2".into())?;
        check(r.n_drp >= 1, || "trust_runtime.n_drp must be at least 1".into())?;
        check(r.kappa >= 0.0, || "trust_runtime.kappa must be non-negative".into())?;
        check(r.alpha >= 0.0 && r.beta >= 0.0 && (r.alpha + r.beta - 1.0).abs() <= 1e-9, || {
            format!("trust_runtime.alpha + beta must equal 1, got {} + {}", r.alpha, r.beta)
        })?;

        let p = self.clustering_protocol.p_ch;
        check(p > 0.0 && p <= 1.0, || format!("clustering_protocol.p_ch must lie in (0, 1], got {p}"))?;

        let attackers = self.attacker_counts();
        let base = self.trust_training.p_dp.max(self.trust_training.p_dy);
        check(attackers[2] == 0 || 6.0 * base <= 1.0, || {
            "attack probabilities exceed 1 for super attackers".into()
        })?;
        Ok(())
    }

    /// Channel phases with resolved start rounds.
    pub fn channel_phases(&self) -> Result<Vec<ChannelPhase>> {
        let m = &self.medium_models;
        if let Some(ps) = &m.phases {
            let mut out = Vec::with_capacity(ps.len());
            for p in ps {
                out.push(ChannelPhase::new(p.alpha0, p.alpha1, p.start_round)?);
            }
            out.sort_by_key(|p| p.start_round);
            return Ok(out);
        }
        let n = m.schedule.len().max(1);
        let max = self.scenario.max_rounds;
        m.schedule
            .iter()
            .enumerate()
            .map(|(i, [a0, a1])| ChannelPhase::new(*a0, *a1, i * max / n))
            .collect()
    }

    pub fn malicious_count(&self) -> usize {
        (self.scenario.malicious_fraction * self.scenario.devices as f64).round() as usize
    }

    /// Generic, advanced and super counts by largest remainder.
    pub fn attacker_counts(&self) -> [usize; 3] {
        largest_remainder(self.malicious_count(), &self.scenario.attacker_mix)
    }

    pub fn sink(&self) -> (f64, f64) {
        match self.scenario.sink {
            Some([x, y]) => (x, y),
            None => (self.scenario.area_width / 2.0, self.scenario.area_height / 2.0),
        }
    }

    pub fn training_params(&self) -> TrainingParams<f64> {
        let t = &self.trust_training;
        TrainingParams { n_f: t.n_f, p_dp: t.p_dp, p_dy: t.p_dy, max_dur: t.max_dur, max_drp: t.max_drp, max_tr: t.max_tr }
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        let m = &self.medium_models;
        let r = &self.trust_runtime;
        ProtocolParams {
            p_ch: self.clustering_protocol.p_ch,
            radius: self.trust_training.radius,
            data_bits: m.data_bits,
            control_bits: m.control_bits,
            monitor_seconds: m.monitor_seconds,
            evidence_window: self.trust_training.n_f,
            energy: m.energy,
            p_dp: self.trust_training.p_dp,
            p_dy: self.trust_training.p_dy,
            classify: ClassifyParams { kappa: r.kappa, n_drp: r.n_drp },
            alpha: r.alpha,
            beta: r.beta,
            classifier: r.classifier,
            sink: self.sink(),
        }
    }
}

/// Splits `total` by `shares`, handing leftover units to the largest
/// fractional remainders (earlier shares win ties).
pub fn largest_remainder(total: usize, shares: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut out = [0usize; 3];
    for (o, r) in out.iter_mut().zip(&raw) {
        *o = r.floor() as usize;
    }
    let mut left = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[scenario]\narea_width = 100.0\narea_height = 100.0\ndevices = 100\nmalicious_fraction = 0.2\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg, ScenarioConfig::new(100.0, 100.0, 100, 0.2));
        assert_eq!(cfg.attacker_counts(), [6, 8, 6]);
        assert_eq!(cfg.sink(), (50.0, 50.0));
    }

    #[test]
    fn roundtrip_through_text() {
        let cfg = ScenarioConfig::new(200.0, 100.0, 150, 0.3);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("devices = 100\n", "");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("devices"), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let text = format!("{MINIMAL}[clustering_protocol]\np_ch = = 0.1\n");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}[clustering_protocol]\np_head = 0.1\n");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("p_head"), "{err}");
    }

    #[test]
    fn bad_mix_rejected() {
        let text = MINIMAL.replace("devices", "attacker_mix = [0.5, 0.5, 0.5]\ndevices");
        assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn quarter_schedule() {
        let cfg = ScenarioConfig::new(100.0, 100.0, 10, 0.0);
        let starts: Vec<usize> = cfg.channel_phases().unwrap().iter().map(|p| p.start_round).collect();
        assert_eq!(starts, vec![0, 1000, 2000, 3000]);
    }

    #[test]
    fn remainder_rounding() {
        assert_eq!(largest_remainder(20, &[0.3, 0.4, 0.3]), [6, 8, 6]);
        assert_eq!(largest_remainder(10, &[0.3, 0.4, 0.3]), [3, 4, 3]);
        assert_eq!(largest_remainder(5, &[0.3, 0.4, 0.3]), [2, 2, 1]);
        assert_eq!(largest_remainder(0, &[0.3, 0.4, 0.3]), [0, 0, 0]);
        for n in 0..200 {
            assert_eq!(largest_remainder(n, &[0.3, 0.4, 0.3]).iter().sum::<usize>(), n);
        }
    }
}

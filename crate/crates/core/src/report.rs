//! Output files: run manifests, per-round and per-cycle CSVs, replicate and
//! sweep tables, training reports and plain-text summaries.
//!
//! Every numeric field is written in decimal notation with at least nine
//! significant digits. Column sets are fixed; see the `*_HEADER` constants.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::metrics::{metric_malicious_clusters, metric_network_lifetime, RunSummary};
use crate::sim::{replicate, run_simulation, run_training_only, MetricSummary, MetricsLog, ScenarioConfig, TrainingRecord};

pub const ROUNDS_HEADER: [&str; 22] = [
    "round",
    "bad_prob",
    "alive",
    "heads",
    "clusters",
    "malicious_clusters",
    "unclustered",
    "attack_drops",
    "attack_delays",
    "packets",
    "timely",
    "delayed",
    "dropped",
    "lost_in_channel",
    "decisions",
    "correct",
    "false_alarms",
    "missed",
    "normal_verdicts",
    "standard_updates",
    "energy_spent",
    "residual_energy",
];

pub const CYCLES_HEADER: [&str; 10] = [
    "cycle",
    "first_round",
    "rounds",
    "malicious_clusters",
    "attacks",
    "timely",
    "forwarding_needed",
    "decisions",
    "correct",
    "alive_end",
];

pub const SUMMARY_HEADER: [&str; 6] = ["metric", "mean", "ci_low", "ci_high", "n", "censored_runs"];

pub const SWEEP_HEADER: [&str; 7] = ["parameter", "value", "metric", "mean", "ci_low", "ci_high", "n"];

pub const GRID_HEADER: [&str; 7] = ["area", "devices", "metric", "mean", "ci_low", "ci_high", "n"];

pub const TRAINING_HEADER: [&str; 11] = [
    "device",
    "rounds_used",
    "forced",
    "boundary_ok",
    "malicious_ex",
    "malicious_en",
    "malicious_he",
    "normal_ex",
    "normal_en",
    "normal_he",
    "energy_spent",
];

/// Decimal rendering with at least nine significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.000000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_num)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_rounds_csv(path: &Path, log: &MetricsLog) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ROUNDS_HEADER)?;
    for r in &log.rounds {
        let ints = [
            r.round,
            0,
            r.alive,
            r.heads,
            r.clusters,
            r.malicious_clusters,
            r.unclustered,
            r.attack_drops,
            r.attack_delays,
            r.packets,
            r.timely,
            r.delayed,
            r.dropped,
            r.lost_in_channel,
            r.decisions,
            r.correct,
            r.false_alarms,
            r.missed,
            r.normal_verdicts,
            r.standard_updates,
        ];
        let mut row: Vec<String> = ints.iter().map(|v| v.to_string()).collect();
        row[1] = fmt_num(r.bad_prob);
        row.push(fmt_num(r.energy_spent));
        row.push(fmt_num(r.residual_energy));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cycles_csv(path: &Path, log: &MetricsLog) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CYCLES_HEADER)?;
    let series = metric_malicious_clusters(log);
    for (i, (chunk, mc)) in log.rounds.chunks(log.rounds_per_cycle.max(1)).zip(series).enumerate() {
        let sum = |f: fn(&crate::sim::RoundRecord) -> usize| chunk.iter().map(f).sum::<usize>().to_string();
        w.write_record([
            i.to_string(),
            chunk[0].round.to_string(),
            chunk.len().to_string(),
            fmt_num(mc),
            sum(|r| r.attack_drops + r.attack_delays),
            sum(|r| r.timely),
            sum(|r| r.packets - r.lost_in_channel),
            sum(|r| r.decisions),
            sum(|r| r.correct),
            chunk.last().map_or(0, |r| r.alive).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_training_csv(path: &Path, records: &[TrainingRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAINING_HEADER)?;
    for r in records {
        w.write_record([
            r.device.to_string(),
            r.rounds_used.to_string(),
            r.forced.to_string(),
            r.boundary_ok.to_string(),
            opt_num(r.malicious.map(|c| c.ex)),
            opt_num(r.malicious.map(|c| c.en)),
            opt_num(r.malicious.map(|c| c.he)),
            opt_num(r.normal.map(|c| c.ex)),
            opt_num(r.normal.map(|c| c.en)),
            opt_num(r.normal.map(|c| c.he)),
            fmt_num(r.energy_spent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_row(name: &str, s: &MetricSummary, censored: usize) -> [String; 6] {
    [name.to_string(), fmt_num(s.mean), fmt_num(s.ci_low), fmt_num(s.ci_high), s.n.to_string(), censored.to_string()]
}

/// Metric table for a set of runs; a single run gives a zero-width interval.
pub fn write_summary_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    let censored = runs.iter().filter(|r| r.lifetime_censored).count();
    for (i, name) in RunSummary::NAMES.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.values()[i]).collect();
        let c = if i == 0 { censored } else { 0 };
        w.write_record(summary_row(name, &MetricSummary::of(&values), c))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table of the five metrics.
pub fn summary_text(title: &str, runs: &[RunSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<20} {:>16} {:>16} {:>16} {:>5}", "metric", "mean", "ci_low", "ci_high", "n");
    for (i, name) in RunSummary::NAMES.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.values()[i]).collect();
        let s = MetricSummary::of(&values);
        let _ = writeln!(
            out,
            "{:<20} {:>16} {:>16} {:>16} {:>5}",
            name,
            fmt_num(s.mean),
            fmt_num(s.ci_low),
            fmt_num(s.ci_high),
            s.n
        );
    }
    let censored = runs.iter().filter(|r| r.lifetime_censored).count();
    if censored > 0 {
        let _ = writeln!(out, "network_lifetime censored at max_rounds in {censored} of {} runs", runs.len());
    }
    out
}

/// Config snapshot plus tool version and output list. Feeding the file back
/// as a config reproduces the run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub command: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &ScenarioConfig, command: &str, outputs: &[&str]) -> Self {
        let mut config = config.clone();
        config.manifest = None;
        Self { config, command: command.into(), outputs: outputs.iter().map(|s| s.to_string()).collect() }
    }

    pub fn to_toml_string(&self) -> String {
        let mut cfg = self.config.clone();
        let mut table = toml::Table::new();
        table.insert("tool".into(), env!("CARGO_PKG_NAME").into());
        table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        table.insert("command".into(), self.command.clone().into());
        table.insert("seed".into(), toml::Value::Integer(self.config.scenario.seed as i64));
        table.insert(
            "outputs".into(),
            toml::Value::Array(self.outputs.iter().map(|s| s.clone().into()).collect()),
        );
        cfg.manifest = Some(table);
        cfg.to_toml_string()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        fs::write(&path, self.to_toml_string()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Files written by a command, in the order they were written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// One seeded run: manifest, per-round CSV, per-cycle CSV and summary.
pub fn cmd_run(config: &ScenarioConfig, out_dir: &Path) -> Result<Artifacts> {
    config.validate()?;
    prepare_dir(out_dir)?;
    let names = ["rounds.csv", "cycles.csv", "summary.csv", "summary.txt"];
    let mut files = vec![RunManifest::new(config, "run", &names).write(out_dir)?];
    let log = run_simulation(config)?;
    let run = RunSummary::of(&log);
    write_rounds_csv(&out_dir.join(names[0]), &log)?;
    write_cycles_csv(&out_dir.join(names[1]), &log)?;
    write_summary_csv(&out_dir.join(names[2]), &[run])?;
    let lt = metric_network_lifetime(&log);
    let mut summary = summary_text(&format!("run seed={} rounds={}", config.scenario.seed, log.rounds.len()), &[run]);
    if lt.censored {
        summary.push_str("no honest device died before max_rounds\n");
    }
    write_text(&out_dir.join(names[3]), &summary)?;
    files.extend(names.iter().map(|n| out_dir.join(n)));
    Ok(Artifacts { files, summary })
}

/// `n_runs` independent streams: manifest, per-run CSV, metric summary with
/// 95% intervals and the mean per-cycle malicious-cluster series.
pub fn cmd_replicate(config: &ScenarioConfig, n_runs: usize, out_dir: &Path) -> Result<Artifacts> {
    config.validate()?;
    prepare_dir(out_dir)?;
    let names = ["runs.csv", "summary.csv", "cycles_mean.csv", "summary.txt"];
    let mut files = vec![RunManifest::new(config, &format!("replicate {n_runs}"), &names).write(out_dir)?];
    let rep = replicate(config, n_runs)?;

    let mut w = writer(&out_dir.join(names[0]))?;
    let mut header = vec!["run"];
    header.extend(RunSummary::NAMES);
    header.push("lifetime_censored");
    w.write_record(&header)?;
    for (i, r) in rep.runs.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.values().iter().map(|v| fmt_num(*v)));
        row.push(r.lifetime_censored.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    write_summary_csv(&out_dir.join(names[1]), &rep.runs)?;

    let mut w = writer(&out_dir.join(names[2]))?;
    w.write_record(["cycle", "malicious_clusters"])?;
    for (i, v) in rep.mean_cycle_series().iter().enumerate() {
        w.write_record([i.to_string(), fmt_num(*v)])?;
    }
    w.flush()?;

    let summary = summary_text(&format!("replicate seed={} runs={n_runs}", config.scenario.seed), &rep.runs);
    write_text(&out_dir.join(names[3]), &summary)?;
    files.extend(names.iter().map(|n| out_dir.join(n)));
    Ok(Artifacts { files, summary })
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    MaliciousFraction,
    Devices,
    /// Side of a square deployment area, metres.
    Area,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::MaliciousFraction => "malicious_fraction",
            SweepParameter::Devices => "devices",
            SweepParameter::Area => "area",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "malicious_fraction" => Ok(SweepParameter::MaliciousFraction),
            "devices" => Ok(SweepParameter::Devices),
            "area" => Ok(SweepParameter::Area),
            other => Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (expected malicious_fraction, devices or area)"
            ))),
        }
    }

    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = config.clone();
        match self {
            SweepParameter::MaliciousFraction => c.scenario.malicious_fraction = value,
            SweepParameter::Devices => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("device count must be a positive integer, got {value}")));
                }
                c.scenario.devices = value as usize;
            }
            SweepParameter::Area => {
                c.scenario.area_width = value;
                c.scenario.area_height = value;
                c.scenario.sink = None;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// The malicious fractions swept by default.
pub const DEFAULT_SWEEP: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// One row per (value, metric) with mean and 95% interval.
pub fn cmd_sweep(
    config: &ScenarioConfig,
    parameter: SweepParameter,
    values: &[f64],
    replications: usize,
    out_dir: &Path,
) -> Result<Artifacts> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs: Vec<ScenarioConfig> = values.iter().map(|v| parameter.apply(config, *v)).collect::<Result<_>>()?;
    prepare_dir(out_dir)?;
    let names = ["sweep.csv", "summary.txt"];
    let mut files = vec![RunManifest::new(
        config,
        &format!("sweep {} {:?} x{replications}", parameter.name(), values),
        &names,
    )
    .write(out_dir)?];
    let mut w = writer(&out_dir.join(names[0]))?;
    w.write_record(SWEEP_HEADER)?;
    let mut summary = String::new();
    for (v, c) in values.iter().zip(&configs) {
        let rep = replicate(c, replications)?;
        for (name, s) in rep.metrics() {
            w.write_record([
                parameter.name().to_string(),
                fmt_num(*v),
                name.to_string(),
                fmt_num(s.mean),
                fmt_num(s.ci_low),
                fmt_num(s.ci_high),
                s.n.to_string(),
            ])?;
        }
        summary.push_str(&summary_text(&format!("{} = {}", parameter.name(), fmt_num(*v)), &rep.runs));
        summary.push('\n');
    }
    w.flush()?;
    write_text(&out_dir.join(names[1]), &summary)?;
    files.extend(names.iter().map(|n| out_dir.join(n)));
    Ok(Artifacts { files, summary })
}

/// Square areas crossed with device counts.
pub fn cmd_grid(
    config: &ScenarioConfig,
    areas: &[f64],
    devices: &[usize],
    replications: usize,
    out_dir: &Path,
) -> Result<Artifacts> {
    if areas.is_empty() || devices.is_empty() {
        return Err(Error::Config("grid needs at least one area and one device count".into()));
    }
    let mut cells = Vec::new();
    for &a in areas {
        for &n in devices {
            let c = SweepParameter::Area.apply(config, a)?;
            cells.push((a, n, SweepParameter::Devices.apply(&c, n as f64)?));
        }
    }
    prepare_dir(out_dir)?;
    let names = ["grid.csv", "summary.txt"];
    let mut files =
        vec![RunManifest::new(config, &format!("grid {areas:?} x {devices:?} x{replications}"), &names).write(out_dir)?];
    let mut w = writer(&out_dir.join(names[0]))?;
    w.write_record(GRID_HEADER)?;
    let mut summary = String::new();
    for (a, n, c) in &cells {
        let rep = replicate(c, replications)?;
        for (name, s) in rep.metrics() {
            w.write_record([
                fmt_num(*a),
                n.to_string(),
                name.to_string(),
                fmt_num(s.mean),
                fmt_num(s.ci_low),
                fmt_num(s.ci_high),
                s.n.to_string(),
            ])?;
        }
        summary.push_str(&summary_text(&format!("area = {} devices = {n}", fmt_num(*a)), &rep.runs));
        summary.push('\n');
    }
    w.flush()?;
    write_text(&out_dir.join(names[1]), &summary)?;
    files.extend(names.iter().map(|n| out_dir.join(n)));
    Ok(Artifacts { files, summary })
}

/// Training phase only: one row per device.
pub fn cmd_train(config: &ScenarioConfig, out_dir: &Path) -> Result<Artifacts> {
    config.validate()?;
    prepare_dir(out_dir)?;
    let names = ["training.csv", "summary.txt"];
    let mut files = vec![RunManifest::new(config, "train", &names).write(out_dir)?];
    let records = run_training_only(config, 0)?;
    write_training_csv(&out_dir.join(names[0]), &records)?;
    let ok = records.iter().filter(|r| r.boundary_ok).count();
    let forced = records.iter().filter(|r| r.forced).count();
    let summary = format!(
        "training seed={} devices={}\nboundary_ok {ok}\nforced {forced}\nmean_rounds {}\n",
        config.scenario.seed,
        records.len(),
        fmt_num(records.iter().map(|r| r.rounds_used as f64).sum::<f64>() / records.len().max(1) as f64),
    );
    write_text(&out_dir.join(names[1]), &summary)?;
    files.extend(names.iter().map(|n| out_dir.join(n)));
    Ok(Artifacts { files, summary })
}

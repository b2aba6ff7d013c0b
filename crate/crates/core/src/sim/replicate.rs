//! Independent seeded runs with normal-approximation confidence intervals.

use std::thread;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::engine::run_simulation_stream;
use super::metrics::{metric_malicious_clusters, MetricsLog, RunSummary};
use crate::error::{Error, Result};

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Runs where the metric was defined.
    pub n: usize,
}

impl MetricSummary {
    /// Mean and 95% interval over the finite entries of `values`.
    pub fn of(values: &[f64]) -> Self {
        let xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let half = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt()
        };
        Self { mean, ci_low: mean - half, ci_high: mean + half, n }
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Per-run summaries of a replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub runs: Vec<RunSummary>,
    pub cycle_series: Vec<Vec<f64>>,
}

impl Replication {
    /// Summary of metric `name` (one of [`RunSummary::NAMES`]).
    pub fn metric(&self, name: &str) -> Option<MetricSummary> {
        let idx = RunSummary::NAMES.iter().position(|n| *n == name)?;
        let values: Vec<f64> = self.runs.iter().map(|r| r.values()[idx]).collect();
        Some(MetricSummary::of(&values))
    }

    pub fn metrics(&self) -> Vec<(&'static str, MetricSummary)> {
        RunSummary::NAMES.iter().map(|n| (*n, self.metric(n).expect("known name"))).collect()
    }

    /// Pointwise mean of the per-cycle malicious-cluster series over the
    /// runs that reached each cycle.
    pub fn mean_cycle_series(&self) -> Vec<f64> {
        let len = self.cycle_series.iter().map(Vec::len).max().unwrap_or(0);
        (0..len)
            .map(|c| {
                let vals: Vec<f64> = self.cycle_series.iter().filter_map(|s| s.get(c).copied()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect()
    }
}

/// Runs streams `0..n_runs` of the master seed, concurrently when the
/// machine allows, and summarises each run with `observe`.
pub fn replicate_with<T, F>(config: &ScenarioConfig, n_runs: usize, observe: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &MetricsLog) -> T + Sync,
{
    config.validate()?;
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(n_runs.max(1));
    let run = |i: usize| run_simulation_stream(config, i as u64).map(|log| observe(i, &log));
    if workers <= 1 {
        return (0..n_runs).map(run).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..n_runs).map(|_| None).collect();
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                s.spawn(move || (w..n_runs).step_by(workers).map(|i| (i, run(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("replication worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every run finished")).collect()
}

/// Replicated experiment over `n_runs` independent streams.
pub fn replicate(config: &ScenarioConfig, n_runs: usize) -> Result<Replication> {
    if n_runs < 2 {
        return Err(Error::Config(format!("replication needs at least 2 runs, got {n_runs}")));
    }
    let per_run = replicate_with(config, n_runs, |_, log| (RunSummary::of(log), metric_malicious_clusters(log)))?;
    let (runs, cycle_series) = per_run.into_iter().unzip();
    Ok(Replication { runs, cycle_series })
}

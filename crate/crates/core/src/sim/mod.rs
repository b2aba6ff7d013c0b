//! Scenario configuration, the simulation lifecycle, metrics and
//! replication.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod replicate;

pub use config::ScenarioConfig;
pub use engine::{
    build_scenario, run_simulation, run_simulation_stream, run_training, run_training_only, stream_rng, SimRng,
};
pub use metrics::{
    metric_decision_accuracy, metric_malicious_clusters, metric_network_lifetime, metric_timely_rate,
    metric_total_attacks, Lifetime, MetricsLog, RoundRecord, RunSummary, TrainingRecord,
};
pub use replicate::{replicate, replicate_with, MetricSummary, Replication};

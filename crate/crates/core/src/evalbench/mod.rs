//! Error metrics, run summaries and the feature-set comparison grid.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    run_experiment, run_noise_experiment, run_study, Scenario, IMPROVEMENT_PAIRS, NOISE_PAIRS,
};
pub use metrics::{
    compute_metrics, improvement, summarize_runs, Metric, MetricValues, OrderStats, RunSummary,
    Stat, DEFAULT_MAPE_FLOOR,
};
pub use report::{
    ErrorReport, ImprovementRow, NoiseSection, Protocol, ReportMetadata, RunRecord, SetRow,
    SiteReport, SEEDING_NOTE,
};

//! Highway base-station load simulation and forecasting.
//!
//! The crate is organised in four layers:
//!
//! * [`road_data`]: loop-detector series (flow, speed per 5-minute slot),
//!   validation and gap filling, the one-slot observation lag, flow noise,
//!   synthetic corridors and the corridor topology itself.
//! * [`cellgen`]: turns road series into per-BS call arrivals. Vehicles
//!   arrive as a Poisson process inside each slot, dwell according to the
//!   cell range and measured speed, place calls at a fixed per-vehicle rate
//!   and hand calls over to the next cell when they outlive the transit.
//! * [`forecast`]: windowed next-slot load prediction with a single-layer
//!   LSTM and a linear head, trained with RMSProp on min-max scaled data.
//! * [`evalbench`]: error metrics, run summaries, improvement percentages and
//!   the feature-set comparison and flow-noise experiments.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cellgen;
pub mod error;
pub mod evalbench;
pub mod forecast;
pub mod rng;
pub mod road_data;

pub use cellgen::{
    generate, CallRecord, CallSegment, CellSeries, DurationComponent, GenParams, Generated,
    SegmentKind,
};
pub use error::{Error, Result};
pub use evalbench::{
    compute_metrics, improvement, run_experiment, run_noise_experiment, run_study,
    summarize_runs, ErrorReport, MetricValues, RunSummary, Scenario,
};
pub use forecast::{
    FeatureSet, LstmModel, Prediction, Scaler, SplitRatios, TrainConfig, TrainedModel,
    WindowSample,
};
pub use road_data::{
    CellSite, Corridor, NoiseConfig, RoadSeries, RoadSlot, SiteSpec, SynthProfile,
    ValidationReport,
};

//! Next-slot forecasting of total cell calls with a single-layer LSTM.
//!
//! Feature tables join one site's road measurements with its generated cell
//! counts, windows are cut per day, scaled on the training split only, and
//! fed to an LSTM trained by RMSProp with early stopping.

mod features;
mod lstm;
mod pipeline;
mod scaler;
mod train;

pub use features::{
    build_windows, split_chronological, Feature, FeatureSet, FeatureTable, SplitRanges,
    SplitRatios, WindowSample, WindowSplits,
};
pub use lstm::{ForwardCache, Layout, LstmModel};
pub use pipeline::{fit_and_forecast, write_predictions, ForecastRun, TrainedModel};
pub use scaler::{fit_scaler, Scaler};
pub use train::{predict, train, Prediction, TrainConfig, TrainHistory};

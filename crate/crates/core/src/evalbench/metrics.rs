use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAPE_FLOOR: f64 = 1e-6;

/// Point-forecast errors over one test set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when every target is at or below the MAPE floor.
    pub mape_percent: Option<f64>,
    /// Targets left out of MAPE because `|y| <= floor`.
    pub mape_excluded: usize,
    pub count: usize,
}

pub fn compute_metrics(predictions: &[f64], targets: &[f64], mape_floor: f64) -> Result<MetricValues> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape {
            expected: format!("{} predictions", targets.len()),
            actual: format!("{} predictions", predictions.len()),
        });
    }
    if targets.is_empty() {
        return Err(Error::Validation("cannot score an empty test set".into()));
    }
    let n = targets.len() as f64;
    let (mut abs, mut sq, mut pct, mut pct_n) = (0.0, 0.0, 0.0, 0usize);
    for (&p, &y) in predictions.iter().zip(targets) {
        let e = p - y;
        abs += e.abs();
        sq += e * e;
        if y.abs() > mape_floor {
            pct += (e / y).abs();
            pct_n += 1;
        }
    }
    let mse = sq / n;
    Ok(MetricValues {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        mape_percent: (pct_n > 0).then(|| 100.0 * pct / pct_n as f64),
        mape_excluded: targets.len() - pct_n,
        count: targets.len(),
    })
}

/// Percentage reduction of `enriched` relative to `base`; negative when the
/// enriched model is worse.
pub fn improvement(base: f64, enriched: f64) -> Result<f64> {
    if base == 0.0 || !base.is_finite() || !enriched.is_finite() {
        return Err(Error::Validation(format!(
            "improvement undefined for baseline {base} and enriched {enriched}"
        )));
    }
    Ok(100.0 * (base - enriched) / base)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Mse,
    Mape,
    Rmse,
}

impl Metric {
    /// Column order of the results tables.
    pub const ALL: [Metric; 4] = [Metric::Mae, Metric::Mse, Metric::Mape, Metric::Rmse];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Mse => "MSE",
            Metric::Mape => "MAPE",
            Metric::Rmse => "RMSE",
        }
    }

    pub fn value(self, m: &MetricValues) -> Option<f64> {
        match self {
            Metric::Mae => Some(m.mae),
            Metric::Mse => Some(m.mse),
            Metric::Mape => m.mape_percent,
            Metric::Rmse => Some(m.rmse),
        }
    }

    pub fn stats(self, s: &RunSummary) -> Option<OrderStats> {
        match self {
            Metric::Mae => Some(s.mae),
            Metric::Mse => Some(s.mse),
            Metric::Mape => s.mape_percent,
            Metric::Rmse => Some(s.rmse),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl OrderStats {
    /// Median of an even count is the lower-middle value, so it is always
    /// one of the observed runs. Returns `None` for no values.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: v[(v.len() - 1) / 2],
            max: v[v.len() - 1],
        })
    }

    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Min => self.min,
            Stat::Median => self.median,
            Stat::Max => self.max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Min,
    Median,
    Max,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Min, Stat::Median, Stat::Max];
}

/// Order statistics of every metric over seeded runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_count: usize,
    pub mae: OrderStats,
    pub mse: OrderStats,
    pub rmse: OrderStats,
    /// Over the runs where MAPE is defined.
    pub mape_percent: Option<OrderStats>,
}

pub fn summarize_runs(runs: &[MetricValues]) -> Result<RunSummary> {
    let of = |f: fn(&MetricValues) -> f64| OrderStats::of(runs.iter().map(f));
    let (Some(mae), Some(mse), Some(rmse)) = (of(|m| m.mae), of(|m| m.mse), of(|m| m.rmse)) else {
        return Err(Error::Validation("cannot summarize zero runs".into()));
    };
    Ok(RunSummary {
        run_count: runs.len(),
        mae,
        mse,
        rmse,
        mape_percent: OrderStats::of(runs.iter().filter_map(|m| m.mape_percent)),
    })
}

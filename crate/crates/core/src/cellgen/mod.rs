//! Per-BS call load from road series.
//!
//! Each site draws its own vehicles from its detector flow. Every vehicle
//! dwells in the cell for `range / speed` (with multiplicative speed noise)
//! and places calls as a Poisson process of rate `lambda`. A call still
//! active when its vehicle leaves the cell is handed over to the next site,
//! unless the downstream flow is lower and the vehicle is taken to have left
//! the highway.

mod export;
mod generate;
mod handover;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_data::SLOT_MINUTES;

pub use export::{read_cell_csv, write_call_log, write_cell_csv};
pub use generate::{generate, Generated};
pub use handover::{extend_one_hop, propagate_handovers, reconcile_flows, Reconciled};
pub use sampling::{
    dwell_time, gen_arrivals, gen_calls_for_transit, lognormal_params, sample_duration,
    MAX_DWELL_MIN, MIN_DWELL_MIN,
};

/// One log-normal call-duration component, parameterised by its own mean and
/// variance (minutes, minutes squared).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationComponent {
    pub weight: f64,
    pub mean_min: f64,
    pub variance_min2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Calls per minute placed by each vehicle.
    pub lambda_per_min: f64,
    pub duration_mix: Vec<DurationComponent>,
    /// Std of the fractional speed perturbation applied per vehicle.
    pub speed_noise_std: f64,
    pub seed: u64,
}

impl Default for GenParams {
    /// One call per five minutes, 1- and 10-minute log-normal calls with
    /// equal weight and variance three times the mean, 5% speed noise.
    fn default() -> Self {
        Self {
            lambda_per_min: 1.0 / 5.0,
            duration_mix: vec![
                DurationComponent {
                    weight: 0.5,
                    mean_min: 1.0,
                    variance_min2: 3.0,
                },
                DurationComponent {
                    weight: 0.5,
                    mean_min: 10.0,
                    variance_min2: 30.0,
                },
            ],
            speed_noise_std: 0.05,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_per_min > 0.0 && self.lambda_per_min.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_per_min must be positive, got {}",
                self.lambda_per_min
            )));
        }
        if !(self.speed_noise_std >= 0.0 && self.speed_noise_std.is_finite()) {
            return Err(Error::Config("speed_noise_std must be >= 0".into()));
        }
        if self.duration_mix.is_empty() {
            return Err(Error::Config("duration mixture is empty".into()));
        }
        for c in &self.duration_mix {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::Config(format!("mixture weight {} outside (0, 1]", c.weight)));
            }
            if !(c.mean_min > 0.0 && c.variance_min2 > 0.0)
                || !c.mean_min.is_finite()
                || !c.variance_min2.is_finite()
            {
                return Err(Error::Config(format!(
                    "mixture component needs positive mean and variance, got ({}, {})",
                    c.mean_min, c.variance_min2
                )));
            }
        }
        let total: f64 = self.duration_mix.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Mean call duration of the mixture, minutes.
    pub fn mean_duration(&self) -> f64 {
        self.duration_mix.iter().map(|c| c.weight * c.mean_min).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleTransit {
    pub vehicle_id: u64,
    pub cell_position: usize,
    pub arrival_time: f64,
    pub dwell_min: f64,
    pub departure_time: f64,
}

impl VehicleTransit {
    pub fn new(vehicle_id: u64, cell_position: usize, arrival_time: f64, dwell_min: f64) -> Self {
        Self {
            vehicle_id,
            cell_position,
            arrival_time,
            dwell_min,
            departure_time: arrival_time + dwell_min,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    New,
    Handover,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallSegment {
    pub cell_position: usize,
    pub enter_time: f64,
    pub leave_or_end_time: f64,
    pub kind: SegmentKind,
}

impl CallSegment {
    pub fn span(&self) -> f64 {
        self.leave_or_end_time - self.enter_time
    }
}

/// Why a call's last segment ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Still active at the end of its last segment; awaiting a handover.
    Pending,
    Completed,
    /// Vehicle passed the last site.
    CorridorExit,
    /// Removed while reconciling adjacent flows.
    LeftHighway,
    /// Cut at the end of the simulated period.
    Horizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call_id: u64,
    pub vehicle_id: u64,
    pub start_time: f64,
    pub total_duration_min: f64,
    pub segments: Vec<CallSegment>,
    pub termination: Termination,
}

impl CallRecord {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.total_duration_min
    }

    pub fn last_segment(&self) -> &CallSegment {
        self.segments.last().expect("call has a first segment")
    }

    pub fn served_time(&self) -> f64 {
        self.segments.iter().map(CallSegment::span).sum()
    }

    pub fn is_pending(&self) -> bool {
        self.termination == Termination::Pending
    }
}

/// Per-slot call arrivals at one BS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSeries {
    pub bs_id: String,
    pub slot_index: Vec<usize>,
    pub new_calls: Vec<u32>,
    pub handover_calls: Vec<u32>,
    pub total_calls: Vec<u32>,
}

impl CellSeries {
    pub fn zeros(bs_id: impl Into<String>, slot_index: Vec<usize>) -> Self {
        let n = slot_index.len();
        Self {
            bs_id: bs_id.into(),
            slot_index,
            new_calls: vec![0; n],
            handover_calls: vec![0; n],
            total_calls: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.slot_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_index.is_empty()
    }

    pub fn position(&self, slot_index: usize) -> Option<usize> {
        self.slot_index.binary_search(&slot_index).ok()
    }

    pub fn totals_consistent(&self) -> bool {
        self.new_calls
            .iter()
            .zip(&self.handover_calls)
            .zip(&self.total_calls)
            .all(|((n, h), t)| n + h == *t)
    }
}

/// Slot index containing `time` (minutes since the weekday-timeline origin).
pub fn slot_of(time: f64) -> usize {
    (time / SLOT_MINUTES).floor() as usize
}

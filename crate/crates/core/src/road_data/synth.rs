use chrono::NaiveDate;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Corridor, RoadSeries, RoadSlot, SLOTS_PER_DAY, WEEKDAYS_PER_WEEK};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

/// Monday 2022-03-28, the origin used for synthetic series.
pub const SYNTH_ORIGIN: NaiveDate = match NaiveDate::from_ymd_opt(2022, 3, 28) {
    Some(d) => d,
    None => panic!("valid date"),
};

const MIN_SPEED_MPH: f64 = 5.0;

/// Per-slot means for a synthetic detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    /// Mean vehicles per slot, one entry per slot of the day.
    pub flow_mean: Vec<f64>,
    /// Mean speed (mph) per slot of the day.
    pub speed_mean: Vec<f64>,
    /// Std of the per-slot Gaussian speed jitter, mph.
    pub speed_jitter_std: f64,
    /// Std of a multiplicative whole-day flow factor.
    pub day_scale_std: f64,
    /// Flow multiplier for Monday..Friday.
    pub weekday_factors: [f64; WEEKDAYS_PER_WEEK],
}

/// Parameters of the built-in two-peak weekday shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiurnalShape {
    pub night_flow: f64,
    pub peak_flow: f64,
    pub free_speed: f64,
    /// Speed lost at the height of the evening peak.
    pub congestion_drop: f64,
}

impl Default for DiurnalShape {
    fn default() -> Self {
        Self {
            night_flow: 8.0,
            peak_flow: 160.0,
            free_speed: 62.0,
            congestion_drop: 18.0,
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((hour - centre) / width).powi(2)).exp()
}

impl SynthProfile {
    pub fn flat(flow: f64, speed: f64) -> Self {
        Self {
            flow_mean: vec![flow; SLOTS_PER_DAY],
            speed_mean: vec![speed; SLOTS_PER_DAY],
            speed_jitter_std: 0.0,
            day_scale_std: 0.0,
            weekday_factors: [1.0; WEEKDAYS_PER_WEEK],
        }
    }

    pub fn zero(speed: f64) -> Self {
        Self::flat(0.0, speed)
    }

    /// Morning and evening peaks over a daytime plateau, quiet nights, and a
    /// speed dip during the evening rush.
    pub fn diurnal(shape: &DiurnalShape) -> Self {
        let mut flow_mean = Vec::with_capacity(SLOTS_PER_DAY);
        let mut speed_mean = Vec::with_capacity(SLOTS_PER_DAY);
        for slot in 0..SLOTS_PER_DAY {
            let h = (slot as f64 + 0.5) * 24.0 / SLOTS_PER_DAY as f64;
            let day = 1.0 / (1.0 + (-(h - 6.0) * 1.5).exp()) / (1.0 + ((h - 21.0) * 1.2).exp());
            let level = 0.45 * day + 0.45 * bump(h, 8.0, 1.2) + 0.55 * bump(h, 17.0, 1.6);
            flow_mean.push(shape.night_flow + (shape.peak_flow - shape.night_flow) * level.min(1.0));
            let dip = bump(h, 17.3, 1.0) + 0.4 * bump(h, 8.0, 0.7);
            speed_mean.push(shape.free_speed - shape.congestion_drop * dip.min(1.0));
        }
        Self {
            flow_mean,
            speed_mean,
            speed_jitter_std: 2.0,
            day_scale_std: 0.08,
            weekday_factors: [0.95, 0.97, 1.0, 1.04, 1.12],
        }
    }

    /// Same profile with all flows multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.flow_mean.iter_mut().for_each(|f| *f *= factor);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.flow_mean.len() != SLOTS_PER_DAY || self.speed_mean.len() != SLOTS_PER_DAY {
            return Err(Error::Config(format!(
                "profile must define {SLOTS_PER_DAY} slots per day"
            )));
        }
        if self.flow_mean.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Config("profile flows must be finite and >= 0".into()));
        }
        if self.speed_mean.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("profile speeds must be finite and > 0".into()));
        }
        if !(self.speed_jitter_std >= 0.0 && self.day_scale_std >= 0.0) {
            return Err(Error::Config("profile noise levels must be >= 0".into()));
        }
        if self.weekday_factors.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Config("weekday factors must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Draws `weeks` of weekday data: Poisson flows around the profile mean and
/// jittered speeds clamped at 5 mph.
pub fn synth_road(
    detector_id: &str,
    profile: &SynthProfile,
    weeks: usize,
    seed: u64,
) -> Result<RoadSeries> {
    if weeks < 1 {
        return Err(Error::Config("weeks must be at least 1".into()));
    }
    profile.validate()?;
    let mut rng = stream(seed, 0, Phase::SynthRoad);
    let jitter = Normal::new(0.0, profile.speed_jitter_std)
        .map_err(|e| Error::Config(e.to_string()))?;
    let day_noise =
        Normal::new(0.0, profile.day_scale_std).map_err(|e| Error::Config(e.to_string()))?;

    let days = weeks * WEEKDAYS_PER_WEEK;
    let mut slots = Vec::with_capacity(days * SLOTS_PER_DAY);
    for day in 0..days {
        let scale = profile.weekday_factors[day % WEEKDAYS_PER_WEEK]
            * (1.0 + day_noise.sample(&mut rng)).max(0.0);
        for t in 0..SLOTS_PER_DAY {
            let mean = profile.flow_mean[t] * scale;
            let flow = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng) as u32
            } else {
                0
            };
            let speed = (profile.speed_mean[t] + jitter.sample(&mut rng)).max(MIN_SPEED_MPH);
            slots.push(RoadSlot {
                slot_index: day * SLOTS_PER_DAY + t,
                flow,
                speed,
            });
        }
    }
    Ok(RoadSeries::new(detector_id, SYNTH_ORIGIN, slots))
}

/// One synthetic series per site; site `k` draws from seed `seed + k`.
pub fn synth_corridor(
    corridor: &Corridor,
    profile: &SynthProfile,
    weeks: usize,
    seed: u64,
) -> Result<Vec<RoadSeries>> {
    corridor
        .sites()
        .iter()
        .map(|site| synth_road(&site.detector_id, profile, weeks, seed.wrapping_add(site.position as u64)))
        .collect()
}

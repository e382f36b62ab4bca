use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{slot_day, RoadSeries, RoadSlot, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::road_data::TIMESTAMP_FORMAT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Longest run of missing slots that is interpolated; longer runs exclude the day.
    pub max_gap: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { max_gap: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilledSlot {
    pub slot_index: usize,
    pub timestamp: String,
    pub flow: u32,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedDay {
    pub date: String,
    pub day: usize,
    pub missing_slots: usize,
    pub longest_gap: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub filled: Vec<FilledSlot>,
    pub excluded_days: Vec<ExcludedDay>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.filled.is_empty() && self.excluded_days.is_empty()
    }
}

pub fn validate_and_fill(series: &RoadSeries) -> Result<(RoadSeries, ValidationReport)> {
    validate_and_fill_with(series, &ValidationConfig::default())
}

/// Fills short gaps by interpolation and drops days with long gaps.
///
/// Only days that carry at least one slot are expected to be complete.
/// Slots present in the input are never modified.
pub fn validate_and_fill_with(
    series: &RoadSeries,
    cfg: &ValidationConfig,
) -> Result<(RoadSeries, ValidationReport)> {
    if series.is_empty() {
        return Err(Error::Validation(format!(
            "series for detector {} is empty",
            series.detector_id
        )));
    }
    if series.slots.windows(2).any(|w| w[0].slot_index >= w[1].slot_index) {
        return Err(Error::Validation(format!(
            "slot indices of detector {} are not strictly increasing",
            series.detector_id
        )));
    }

    let mut by_day: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for s in &series.slots {
        by_day
            .entry(slot_day(s.slot_index))
            .or_default()
            .insert(s.slot_index % SLOTS_PER_DAY);
    }

    let mut report = ValidationReport::default();
    let mut kept_days = BTreeSet::new();
    let mut to_fill = Vec::new();
    for (&day, present) in &by_day {
        let missing: Vec<usize> = (0..SLOTS_PER_DAY).filter(|t| !present.contains(t)).collect();
        let longest = longest_run(&missing);
        if longest > cfg.max_gap {
            report.excluded_days.push(ExcludedDay {
                date: series.date_of_day(day).to_string(),
                day,
                missing_slots: missing.len(),
                longest_gap: longest,
            });
        } else {
            kept_days.insert(day);
            to_fill.extend(missing.into_iter().map(|t| day * SLOTS_PER_DAY + t));
        }
    }

    let mut slots: Vec<RoadSlot> = series
        .slots
        .iter()
        .filter(|s| kept_days.contains(&slot_day(s.slot_index)))
        .copied()
        .collect();
    for idx in to_fill {
        let filled = interpolate(&series.slots, idx);
        report.filled.push(FilledSlot {
            slot_index: idx,
            timestamp: series.timestamp(idx).format(TIMESTAMP_FORMAT).to_string(),
            flow: filled.flow,
            speed: filled.speed,
        });
        slots.push(filled);
    }
    slots.sort_by_key(|s| s.slot_index);

    Ok((
        RoadSeries::new(series.detector_id.clone(), series.origin, slots),
        report,
    ))
}

fn longest_run(sorted: &[usize]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<usize> = None;
    for &x in sorted {
        run = match prev {
            Some(p) if p + 1 == x => run + 1,
            _ => 1,
        };
        best = best.max(run);
        prev = Some(x);
    }
    best
}

/// Linear interpolation between the nearest present neighbours in the raw input.
fn interpolate(present: &[RoadSlot], idx: usize) -> RoadSlot {
    let pos = present.partition_point(|s| s.slot_index < idx);
    let before = pos.checked_sub(1).map(|p| present[p]);
    let after = present.get(pos).copied();
    let (flow, speed) = match (before, after) {
        (Some(a), Some(b)) => {
            let w = (idx - a.slot_index) as f64 / (b.slot_index - a.slot_index) as f64;
            let flow = a.flow as f64 + w * (b.flow as f64 - a.flow as f64);
            (flow.round() as u32, a.speed + w * (b.speed - a.speed))
        }
        (Some(a), None) => (a.flow, a.speed),
        (None, Some(b)) => (b.flow, b.speed),
        (None, None) => unreachable!("validated series is non-empty"),
    };
    RoadSlot {
        slot_index: idx,
        flow,
        speed,
    }
}

/// Rebases every series to the earliest origin and keeps only the days that
/// all of them cover.
pub fn align_calendars(series: &[RoadSeries]) -> Result<Vec<RoadSeries>> {
    let origin = series
        .iter()
        .map(|s| s.origin)
        .min()
        .ok_or_else(|| Error::Validation("no road series to align".into()))?;
    let rebased: Vec<RoadSeries> = series
        .iter()
        .map(|s| s.rebase(origin).expect("origin is the minimum Monday"))
        .collect();
    let mut common: Option<BTreeSet<usize>> = None;
    for s in &rebased {
        let days: BTreeSet<usize> = s.slots.iter().map(|x| slot_day(x.slot_index)).collect();
        common = Some(match common {
            None => days,
            Some(c) => c.intersection(&days).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        return Err(Error::CalendarMismatch(
            "road series share no common day".into(),
        ));
    }
    Ok(rebased
        .into_iter()
        .map(|mut s| {
            let before = s.len();
            s.slots.retain(|x| common.contains(&slot_day(x.slot_index)));
            if s.len() != before {
                log::info!(
                    "detector {}: dropped {} slots outside the common calendar",
                    s.detector_id,
                    before - s.len()
                );
            }
            s
        })
        .collect())
}

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cellgen::CellSeries;
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};
use crate::road_data::{slot_calendar, slot_day, RoadSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Flow,
    Speed,
    NewCalls,
    HandoverCalls,
    TotalCalls,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Flow,
        Feature::Speed,
        Feature::NewCalls,
        Feature::HandoverCalls,
        Feature::TotalCalls,
    ];

    fn column(self) -> usize {
        self as usize
    }
}

/// Inputs fed to the forecaster. The target is always next-slot total calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    C,
    FSC,
    NHC,
    FSNHC,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [FeatureSet::C, FeatureSet::FSC, FeatureSet::NHC, FeatureSet::FSNHC];

    pub fn features(self) -> &'static [Feature] {
        use Feature::*;
        match self {
            FeatureSet::C => &[TotalCalls],
            FeatureSet::FSC => &[Flow, Speed, TotalCalls],
            FeatureSet::NHC => &[NewCalls, HandoverCalls, TotalCalls],
            FeatureSet::FSNHC => &[Flow, Speed, NewCalls, HandoverCalls, TotalCalls],
        }
    }

    pub fn width(self) -> usize {
        self.features().len()
    }

    pub fn uses_handovers(self) -> bool {
        self.features().contains(&Feature::HandoverCalls)
    }

    pub fn uses_road(self) -> bool {
        self.features().contains(&Feature::Flow)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::C => "C",
            FeatureSet::FSC => "FSC",
            FeatureSet::NHC => "NHC",
            FeatureSet::FSNHC => "FSNHC",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(FeatureSet::C),
            "FSC" => Ok(FeatureSet::FSC),
            "NHC" => Ok(FeatureSet::NHC),
            "FSNHC" => Ok(FeatureSet::FSNHC),
            other => Err(Error::Config(format!("unknown feature set `{other}`"))),
        }
    }
}

/// Road and cell features per slot for one BS.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub bs_id: String,
    pub slot_index: Vec<usize>,
    columns: [Vec<f64>; 5],
}

impl FeatureTable {
    /// Joins detector readings with generated call counts on slot index.
    ///
    /// `road` is the series as the detector recorded it. Cell load is
    /// generated from the lag-aligned series, so the reading of slot `s`
    /// describes the vehicles that enter the cell in `s + 1`; the row for
    /// `s` pairs that reading (available at the end of `s`) with the calls
    /// counted in `s`.
    pub fn assemble(road: &RoadSeries, cells: &CellSeries) -> Result<Self> {
        let mut table = FeatureTable {
            bs_id: cells.bs_id.clone(),
            slot_index: Vec::new(),
            columns: Default::default(),
        };
        for (i, &slot) in cells.slot_index.iter().enumerate() {
            let Some(r) = road.get(slot) else { continue };
            table.slot_index.push(slot);
            let row = [
                r.flow as f64,
                r.speed,
                cells.new_calls[i] as f64,
                cells.handover_calls[i] as f64,
                cells.total_calls[i] as f64,
            ];
            for (col, v) in table.columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        if table.slot_index.is_empty() {
            return Err(Error::CalendarMismatch(format!(
                "detector {} and BS {} share no slots",
                road.detector_id, cells.bs_id
            )));
        }
        Ok(table)
    }

    /// Builds a table from explicit rows `(slot_index, [flow, speed, new, handover, total])`.
    pub fn from_rows(bs_id: impl Into<String>, rows: impl IntoIterator<Item = (usize, [f64; 5])>) -> Self {
        let mut table = FeatureTable {
            bs_id: bs_id.into(),
            slot_index: Vec::new(),
            columns: Default::default(),
        };
        for (slot, row) in rows {
            table.slot_index.push(slot);
            for (col, v) in table.columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.slot_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_index.is_empty()
    }

    pub fn column(&self, feature: Feature) -> &[f64] {
        &self.columns[feature.column()]
    }

    pub fn column_mut(&mut self, feature: Feature) -> &mut [f64] {
        &mut self.columns[feature.column()]
    }

    /// Calendar weeks spanned by the table, counted from its first week.
    pub fn week_count(&self) -> usize {
        match (self.slot_index.first(), self.slot_index.last()) {
            (Some(&a), Some(&b)) => slot_calendar(b).week - slot_calendar(a).week + 1,
            _ => 0,
        }
    }
}

/// Train:validation:test proportions in whole weeks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitRatios {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad split `{s}`, expected e.g. 12:6:6")))?;
        match parts[..] {
            [a, b, c] => Ok(Self::new(a, b, c)),
            _ => Err(Error::Config(format!("bad split `{s}`, expected three parts"))),
        }
    }
}

/// Zero-based week ranges of each split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Consecutive, disjoint week ranges in calendar order.
pub fn split_chronological(weeks: usize, ratios: SplitRatios) -> Result<SplitRanges> {
    if ratios.train == 0 || ratios.test == 0 {
        return Err(Error::Config(format!(
            "split {ratios} needs at least one training and one test week"
        )));
    }
    if ratios.total() != weeks {
        return Err(Error::Config(format!(
            "split {ratios} covers {} weeks but the data has {weeks}",
            ratios.total()
        )));
    }
    let a = ratios.train;
    let b = a + ratios.val;
    Ok(SplitRanges {
        train: 0..a,
        val: a..b,
        test: b..weeks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// `steps x width` history, row-major, oldest row first.
    pub inputs: Vec<f64>,
    pub steps: usize,
    pub width: usize,
    /// Total calls in the slot after the history.
    pub target: f64,
    /// Slot of the target.
    pub slot_index: usize,
}

impl WindowSample {
    pub fn row(&self, step: usize) -> &[f64] {
        &self.inputs[step * self.width..(step + 1) * self.width]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowSplits {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

/// Slides a `history`-slot window over every day and assigns each window to
/// the split of its week. Windows never cross a day boundary; training and
/// validation windows are shuffled with `shuffle_seed`, test windows keep
/// chronological order.
pub fn build_windows(
    table: &FeatureTable,
    set: FeatureSet,
    history: usize,
    ranges: &SplitRanges,
    shuffle_seed: u64,
) -> Result<WindowSplits> {
    if history == 0 {
        return Err(Error::Config("history length must be at least 1".into()));
    }
    let first_week = table
        .slot_index
        .first()
        .map(|&s| slot_calendar(s).week)
        .ok_or_else(|| Error::Validation(format!("no feature rows for {}", table.bs_id)))?;
    let features = set.features();
    let width = features.len();
    let total = table.column(Feature::TotalCalls);

    let mut days: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &slot) in table.slot_index.iter().enumerate() {
        days.entry(slot_day(slot)).or_default().push(row);
    }

    let mut out = WindowSplits::default();
    for (day, rows) in days {
        if rows.len() < history + 1 {
            log::warn!(
                "{}: day {day} has {} slots, fewer than {} needed for one window; skipped",
                table.bs_id,
                rows.len(),
                history + 1
            );
            continue;
        }
        let week = slot_calendar(table.slot_index[rows[0]]).week - first_week;
        let bucket = if ranges.train.contains(&week) {
            &mut out.train
        } else if ranges.val.contains(&week) {
            &mut out.val
        } else if ranges.test.contains(&week) {
            &mut out.test
        } else {
            continue;
        };
        for end in history..rows.len() {
            let span = &rows[end - history..=end];
            // Require consecutive slots.
            if table.slot_index[span[history]] - table.slot_index[span[0]] != history {
                continue;
            }
            let mut inputs = Vec::with_capacity(history * width);
            for &r in &span[..history] {
                inputs.extend(features.iter().map(|f| table.column(*f)[r]));
            }
            bucket.push(WindowSample {
                inputs,
                steps: history,
                width,
                target: total[span[history]],
                slot_index: table.slot_index[span[history]],
            });
        }
    }

    out.train.shuffle(&mut stream(shuffle_seed, 0, Phase::Shuffle));
    out.val.shuffle(&mut stream(shuffle_seed, 1, Phase::Shuffle));
    Ok(out)
}

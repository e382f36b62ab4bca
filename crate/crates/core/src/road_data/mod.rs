//! Loop-detector road series and the corridor they describe.
//!
//! A [`RoadSeries`] holds weekday-only 5-minute slots. Slot indices count
//! weekday slots from the series origin (a Monday), so the slot after Friday
//! 23:55 is the following Monday 00:00.

mod corridor;
mod csv_io;
mod lag;
mod noise;
mod synth;
mod validate;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

pub use corridor::{build_corridor, CellSite, Corridor, SiteSpec};
pub use csv_io::{parse_road_csv, read_road_csv, write_road_csv, TIMESTAMP_FORMAT};
pub use lag::{lag_align, lead_align};
pub use noise::{add_flow_noise, NoiseConfig};
pub use synth::{synth_corridor, synth_road, DiurnalShape, SynthProfile, SYNTH_ORIGIN};
pub use validate::{
    align_calendars, validate_and_fill, validate_and_fill_with, ExcludedDay, FilledSlot,
    ValidationConfig, ValidationReport,
};

pub const SLOT_SECONDS: u32 = 300;
pub const SLOT_MINUTES: f64 = 5.0;
pub const SLOTS_PER_DAY: usize = 288;
pub const WEEKDAYS_PER_WEEK: usize = 5;
pub const SLOTS_PER_WEEK: usize = SLOTS_PER_DAY * WEEKDAYS_PER_WEEK;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSlot {
    pub slot_index: usize,
    /// Vehicles observed during the slot.
    pub flow: u32,
    /// Slot-average speed in mph.
    pub speed: f64,
}

/// Calendar position of a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotCalendar {
    /// Weeks since the series origin.
    pub week: usize,
    pub weekday: Weekday,
    /// Slot within the day, `0..288`.
    pub time_of_day: usize,
}

impl SlotCalendar {
    /// Weekday-only day counter (Monday of week 0 is day 0).
    pub fn day(&self) -> usize {
        self.week * WEEKDAYS_PER_WEEK + self.weekday.num_days_from_monday() as usize
    }
}

pub fn slot_calendar(slot_index: usize) -> SlotCalendar {
    let day = slot_index / SLOTS_PER_DAY;
    let weekday = match day % WEEKDAYS_PER_WEEK {
        0 => Weekday::Mon,
        1 => Weekday::Tue,
        2 => Weekday::Wed,
        3 => Weekday::Thu,
        _ => Weekday::Fri,
    };
    SlotCalendar {
        week: day / WEEKDAYS_PER_WEEK,
        weekday,
        time_of_day: slot_index % SLOTS_PER_DAY,
    }
}

/// Day counter of a slot index.
pub fn slot_day(slot_index: usize) -> usize {
    slot_index / SLOTS_PER_DAY
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadSeries {
    pub detector_id: String,
    /// Monday that slot 0 falls on.
    pub origin: NaiveDate,
    pub slots: Vec<RoadSlot>,
}

impl RoadSeries {
    pub fn new(detector_id: impl Into<String>, origin: NaiveDate, slots: Vec<RoadSlot>) -> Self {
        debug_assert_eq!(origin.weekday(), Weekday::Mon);
        Self {
            detector_id: detector_id.into(),
            origin,
            slots,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn calendar(&self, slot_index: usize) -> SlotCalendar {
        slot_calendar(slot_index)
    }

    pub fn timestamp(&self, slot_index: usize) -> NaiveDateTime {
        let cal = slot_calendar(slot_index);
        let date = self.origin
            + Duration::days(
                (cal.week * 7) as i64 + cal.weekday.num_days_from_monday() as i64,
            );
        date.and_time(NaiveTime::MIN)
            + Duration::seconds((cal.time_of_day as u32 * SLOT_SECONDS) as i64)
    }

    pub fn date_of_day(&self, day: usize) -> NaiveDate {
        self.origin
            + Duration::days(
                ((day / WEEKDAYS_PER_WEEK) * 7 + day % WEEKDAYS_PER_WEEK) as i64,
            )
    }

    /// Slot index of a timestamp, or `None` for weekends, times before the
    /// origin and times off the 5-minute grid.
    pub fn slot_index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        slot_index_from(self.origin, ts)
    }

    /// Position of `slot_index` in `slots`.
    pub fn position(&self, slot_index: usize) -> Option<usize> {
        self.slots
            .binary_search_by_key(&slot_index, |s| s.slot_index)
            .ok()
    }

    pub fn get(&self, slot_index: usize) -> Option<&RoadSlot> {
        self.position(slot_index).map(|i| &self.slots[i])
    }

    pub fn flows(&self) -> Vec<u32> {
        self.slots.iter().map(|s| s.flow).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.speed).collect()
    }

    pub fn slot_indices(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.slot_index).collect()
    }

    /// Re-express slot indices against an earlier Monday.
    pub fn rebase(&self, origin: NaiveDate) -> Option<RoadSeries> {
        if origin > self.origin || origin.weekday() != Weekday::Mon {
            return None;
        }
        let weeks = ((self.origin - origin).num_days() / 7) as usize;
        let shift = weeks * SLOTS_PER_WEEK;
        Some(RoadSeries {
            detector_id: self.detector_id.clone(),
            origin,
            slots: self
                .slots
                .iter()
                .map(|s| RoadSlot {
                    slot_index: s.slot_index + shift,
                    ..*s
                })
                .collect(),
        })
    }
}

/// Monday on or before `date`.
pub fn week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

pub(crate) fn slot_index_from(origin: NaiveDate, ts: NaiveDateTime) -> Option<usize> {
    let days = (ts.date() - origin).num_days();
    if days < 0 {
        return None;
    }
    let weekday = ts.date().weekday().num_days_from_monday() as i64;
    if weekday >= WEEKDAYS_PER_WEEK as i64 {
        return None;
    }
    let secs = (ts - ts.date().and_time(NaiveTime::MIN)).num_seconds();
    if secs % SLOT_SECONDS as i64 != 0 {
        return None;
    }
    let day = (days / 7) * WEEKDAYS_PER_WEEK as i64 + weekday;
    Some(day as usize * SLOTS_PER_DAY + (secs / SLOT_SECONDS as i64) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 3, 28).unwrap()
    }

    #[test]
    fn calendar_skips_weekends() {
        let series = RoadSeries::new("d", origin(), vec![]);
        let fri_last = 4 * SLOTS_PER_DAY + 287;
        let cal = series.calendar(fri_last);
        assert_eq!(cal.weekday, Weekday::Fri);
        assert_eq!(cal.time_of_day, 287);
        let next = series.calendar(fri_last + 1);
        assert_eq!((next.week, next.weekday, next.time_of_day), (1, Weekday::Mon, 0));
        assert_eq!(
            series.timestamp(fri_last + 1),
            NaiveDate::from_ymd_opt(2022, 4, 4).unwrap().and_hms_opt(0, 0, 0).unwrap()
        );
    }

    #[test]
    fn timestamp_and_index_are_inverse() {
        let series = RoadSeries::new("d", origin(), vec![]);
        for idx in [0, 1, 287, 288, 1439, 1440, 34_559] {
            assert_eq!(series.slot_index_of(series.timestamp(idx)), Some(idx));
        }
        let saturday = NaiveDate::from_ymd_opt(2022, 4, 2).unwrap().and_hms_opt(8, 0, 0).unwrap();
        assert_eq!(series.slot_index_of(saturday), None);
        let off_grid = origin().and_hms_opt(0, 3, 0).unwrap();
        assert_eq!(series.slot_index_of(off_grid), None);
    }

    #[test]
    fn rebase_shifts_by_whole_weeks() {
        let later = NaiveDate::from_ymd_opt(2022, 4, 11).unwrap();
        let s = RoadSeries::new("d", later, vec![RoadSlot { slot_index: 3, flow: 1, speed: 60.0 }]);
        let r = s.rebase(origin()).unwrap();
        assert_eq!(r.slots[0].slot_index, 3 + 2 * SLOTS_PER_WEEK);
        assert_eq!(r.timestamp(r.slots[0].slot_index), s.timestamp(3));
        assert!(s.rebase(NaiveDate::from_ymd_opt(2022, 4, 12).unwrap()).is_none());
    }
}

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDateTime};

use super::{slot_index_from, week_start, RoadSeries, RoadSlot};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const HEADER: [&str; 3] = ["timestamp", "flow", "speed"];

/// Reads one detector export (`timestamp,flow,speed`).
pub fn parse_road_csv(path: impl AsRef<Path>, detector_id: &str) -> Result<RoadSeries> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_road_csv(file, path, detector_id)
}

/// Like [`parse_road_csv`] but from any reader; `path` is only used in errors.
pub fn read_road_csv(reader: impl Read, path: &Path, detector_id: &str) -> Result<RoadSeries> {
    if detector_id.trim().is_empty() || detector_id.contains([',', '/', '\\']) {
        return Err(Error::UnknownDetector(detector_id.to_string()));
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(
            1,
            format!("expected header `timestamp,flow,speed`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut rows: Vec<(usize, NaiveDateTime, u32, f64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let flow: i64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad flow `{}`", &record[1])))?;
        let speed: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad speed `{}`", &record[2])))?;
        if flow < 0 || flow > u32::MAX as i64 {
            return Err(Error::Validation(format!(
                "{}:{line}: flow {flow} out of range",
                path.display()
            )));
        }
        if !speed.is_finite() || speed < 0.0 {
            return Err(Error::Validation(format!(
                "{}:{line}: speed {speed} must be finite and non-negative",
                path.display()
            )));
        }
        rows.push((line, ts, flow as u32, speed));
    }

    let Some(first_date) = rows.iter().map(|r| r.1.date()).min() else {
        return Ok(RoadSeries::new(detector_id, super::SYNTH_ORIGIN, Vec::new()));
    };
    let origin = week_start(first_date);

    let mut seen: HashMap<usize, usize> = HashMap::with_capacity(rows.len());
    let mut slots = Vec::with_capacity(rows.len());
    let mut weekend = 0usize;
    for (line, ts, flow, speed) in rows {
        if ts.date().weekday().num_days_from_monday() >= 5 {
            weekend += 1;
            continue;
        }
        let slot_index = slot_index_from(origin, ts).ok_or_else(|| {
            parse_err(line, format!("timestamp {ts} is not on a 5-minute boundary"))
        })?;
        if seen.insert(slot_index, line).is_some() {
            return Err(Error::DuplicateTimestamp {
                path: path.to_path_buf(),
                line,
                timestamp: ts.format(TIMESTAMP_FORMAT).to_string(),
            });
        }
        slots.push(RoadSlot {
            slot_index,
            flow,
            speed,
        });
    }
    if weekend > 0 {
        log::warn!("{}: skipped {weekend} weekend rows", path.display());
    }
    slots.sort_by_key(|s| s.slot_index);
    Ok(RoadSeries::new(detector_id, origin, slots))
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

/// Writes the canonical form read by [`read_road_csv`].
pub fn write_road_csv(series: &RoadSeries, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for s in &series.slots {
        writeln!(
            out,
            "{},{},{:?}",
            series.timestamp(s.slot_index).format(TIMESTAMP_FORMAT),
            s.flow,
            s.speed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_data::SLOTS_PER_DAY;
    use chrono::Weekday;

    fn read(text: &str) -> Result<RoadSeries> {
        read_road_csv(text.as_bytes(), Path::new("test.csv"), "3086071")
    }

    fn monday_csv() -> String {
        let mut s = String::from("timestamp,flow,speed\n");
        for i in 0..SLOTS_PER_DAY {
            let (h, m) = (i / 12, (i % 12) * 5);
            s.push_str(&format!("2022-03-28T{h:02}:{m:02}:00,{},{:?}\n", i % 40, 60.5));
        }
        s
    }

    #[test]
    fn one_monday_gives_288_slots() {
        let series = read(&monday_csv()).unwrap();
        assert_eq!(series.len(), SLOTS_PER_DAY);
        assert_eq!(series.calendar(series.slots[0].slot_index).weekday, Weekday::Mon);
        assert_eq!(series.slots[5].flow, 5);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = monday_csv();
        let mut out = Vec::new();
        write_road_csv(&read(&text).unwrap(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn duplicate_timestamp_is_named() {
        let text = "timestamp,flow,speed\n2022-03-28T00:00:00,1,60.0\n2022-03-28T00:05:00,1,60.0\n2022-03-28T00:00:00,2,61.0\n";
        match read(text) {
            Err(Error::DuplicateTimestamp { timestamp, line, .. }) => {
                assert_eq!(timestamp, "2022-03-28T00:00:00");
                assert_eq!(line, 4);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "timestamp,flow,speed\n2022-03-28T00:00:00,1,60.0\n2022-03-28T00:05:00,abc,60.0\n";
        match read(text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_values_are_validation_errors() {
        let neg_flow = "timestamp,flow,speed\n2022-03-28T00:00:00,-1,60.0\n";
        assert!(matches!(read(neg_flow), Err(Error::Validation(_))));
        let neg_speed = "timestamp,flow,speed\n2022-03-28T00:00:00,1,-60.0\n";
        assert!(matches!(read(neg_speed), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_detector_and_bad_header() {
        assert!(matches!(
            read_road_csv(monday_csv().as_bytes(), Path::new("x"), " "),
            Err(Error::UnknownDetector(_))
        ));
        assert!(matches!(read("ts,flow,speed\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn off_grid_timestamp_rejected_and_weekend_skipped() {
        let text = "timestamp,flow,speed\n2022-03-28T00:02:00,1,60.0\n";
        assert!(matches!(read(text), Err(Error::Parse { line: 2, .. })));
        let text = "timestamp,flow,speed\n2022-04-01T00:00:00,1,60.0\n2022-04-02T00:00:00,5,60.0\n";
        let s = read(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.calendar(s.slots[0].slot_index).weekday, Weekday::Fri);
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let text = "timestamp,flow,speed\n2022-03-28T00:05:00,2,60.0\n2022-03-28T00:00:00,1,60.0\n";
        let s = read(text).unwrap();
        assert_eq!(s.flows(), vec![1, 2]);
        assert_eq!(s.slot_indices(), vec![0, 1]);
    }
}

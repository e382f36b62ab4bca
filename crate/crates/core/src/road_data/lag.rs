use super::{RoadSeries, RoadSlot};
use crate::error::{Error, Result};

/// Shifts measurements one slot later: slot `t` of the output carries what the
/// detector recorded in slot `t - 1`. Slots whose predecessor is absent are
/// dropped, so a contiguous series of length `n` becomes length `n - 1`.
pub fn lag_align(series: &RoadSeries) -> Result<RoadSeries> {
    shift(series, "lag_align")
}

/// Inverse of [`lag_align`]: every slot moves one index earlier, so
/// `lead_align(lag_align(x))` is `x` without its last slot.
pub fn lead_align(series: &RoadSeries) -> Result<RoadSeries> {
    check_len(series, "lead_align")?;
    let slots = series
        .slots
        .iter()
        .filter(|s| s.slot_index > 0)
        .map(|s| RoadSlot {
            slot_index: s.slot_index - 1,
            ..*s
        })
        .collect();
    Ok(RoadSeries::new(series.detector_id.clone(), series.origin, slots))
}

fn check_len(series: &RoadSeries, op: &str) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::Validation(format!(
            "{op} needs at least 2 slots, detector {} has {}",
            series.detector_id,
            series.len()
        )));
    }
    Ok(())
}

fn shift(series: &RoadSeries, op: &str) -> Result<RoadSeries> {
    check_len(series, op)?;
    let slots = series
        .slots
        .windows(2)
        .filter(|w| w[1].slot_index == w[0].slot_index + 1)
        .map(|w| RoadSlot {
            slot_index: w[1].slot_index,
            ..w[0]
        })
        .collect();
    Ok(RoadSeries::new(series.detector_id.clone(), series.origin, slots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_data::SYNTH_ORIGIN;
    use proptest::prelude::*;

    fn series(flows: &[u32]) -> RoadSeries {
        let slots = flows
            .iter()
            .enumerate()
            .map(|(i, &f)| RoadSlot { slot_index: i, flow: f, speed: f as f64 + 0.5 })
            .collect();
        RoadSeries::new("d", SYNTH_ORIGIN, slots)
    }

    #[test]
    fn shifts_by_one() {
        let out = lag_align(&series(&[7, 8, 9])).unwrap();
        assert_eq!(out.flows(), vec![7, 8]);
        assert_eq!(out.slot_indices(), vec![1, 2]);
        assert_eq!(out.speeds(), vec![7.5, 8.5]);
    }

    #[test]
    fn too_short_is_error() {
        assert!(lag_align(&series(&[1])).is_err());
        assert!(lag_align(&series(&[])).is_err());
    }

    #[test]
    fn gap_drops_orphaned_slot() {
        let mut s = series(&[1, 2, 3, 4]);
        s.slots.remove(2);
        let out = lag_align(&s).unwrap();
        assert_eq!(out.slot_indices(), vec![1]);
    }

    proptest! {
        #[test]
        fn length_drop_is_additive(flows in prop::collection::vec(0u32..500, 3..60)) {
            let s = series(&flows);
            let once = lag_align(&s).unwrap();
            let twice = lag_align(&once).unwrap();
            prop_assert_eq!(once.len(), s.len() - 1);
            prop_assert_eq!(twice.len(), s.len() - 2);
            for (i, slot) in twice.slots.iter().enumerate() {
                prop_assert_eq!(slot.slot_index, i + 2);
                prop_assert_eq!(slot.flow, flows[i]);
            }
        }

        #[test]
        fn lead_undoes_lag(flows in prop::collection::vec(0u32..500, 2..60)) {
            let s = series(&flows);
            let back = lead_align(&lag_align(&s).unwrap());
            if s.len() >= 3 {
                let back = back.unwrap();
                prop_assert_eq!(&back.slots[..], &s.slots[..s.len() - 1]);
            } else {
                prop_assert!(back.is_err());
            }
        }
    }
}

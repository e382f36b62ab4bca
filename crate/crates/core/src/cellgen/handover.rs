use rand::Rng;

use super::{dwell_time, slot_of, CallRecord, CallSegment, GenParams, SegmentKind, Termination};
use crate::error::{Error, Result};
use crate::road_data::{CellSite, Corridor, RoadSeries, SLOT_MINUTES};

/// End time (minutes) of the run of consecutive slots containing `slot_index`.
pub(crate) fn block_end(series: &RoadSeries, slot_index: usize) -> Option<f64> {
    let mut pos = series.position(slot_index)?;
    while pos + 1 < series.slots.len()
        && series.slots[pos + 1].slot_index == series.slots[pos].slot_index + 1
    {
        pos += 1;
    }
    Some((series.slots[pos].slot_index + 1) as f64 * SLOT_MINUTES)
}

/// Ends the pending call at `time` if `end` or `horizon` come first, otherwise
/// leaves it pending for the next cell at `departure`.
pub(crate) fn close_segment(end: f64, departure: f64, horizon: f64) -> (f64, Termination) {
    if end <= departure.min(horizon) {
        (end, Termination::Completed)
    } else if departure < horizon {
        (departure, Termination::Pending)
    } else {
        (horizon, Termination::Horizon)
    }
}

/// Hands a pending call over to the next site and serves it there until it
/// ends, the vehicle leaves that cell, or `horizon` is reached.
pub fn extend_one_hop<R: Rng + ?Sized>(
    call: &mut CallRecord,
    corridor: &Corridor,
    road: &[RoadSeries],
    params: &GenParams,
    rng: &mut R,
    horizon: f64,
) -> Result<()> {
    if !call.is_pending() {
        return Ok(());
    }
    let last = *call.last_segment();
    let next = last.cell_position + 1;
    let Some(site) = corridor.site(next) else {
        call.termination = Termination::CorridorExit;
        return Ok(());
    };
    let enter = last.leave_or_end_time;
    if enter >= horizon {
        call.termination = Termination::Horizon;
        return Ok(());
    }
    let series = road.get(next).ok_or_else(|| {
        Error::Validation(format!("no road series for site {}", site.bs_id))
    })?;
    let Some(slot) = series.get(slot_of(enter)) else {
        call.termination = Termination::Horizon;
        return Ok(());
    };
    let dwell = dwell_time(site.range_miles, slot.speed, params, rng).map_err(|e| {
        e.context(format!("site {} slot {}", site.bs_id, slot.slot_index))
    })?;
    let (leave, termination) = close_segment(call.end_time(), enter + dwell, horizon);
    call.segments.push(CallSegment {
        cell_position: next,
        enter_time: enter,
        leave_or_end_time: leave,
        kind: SegmentKind::Handover,
    });
    call.termination = termination;
    Ok(())
}

/// Follows a call across consecutive cells until it ends, leaves the
/// corridor, or runs past the end of the road data. No flow reconciliation
/// is applied here.
pub fn propagate_handovers<R: Rng + ?Sized>(
    mut call: CallRecord,
    corridor: &Corridor,
    road: &[RoadSeries],
    params: &GenParams,
    rng: &mut R,
) -> Result<CallRecord> {
    let first = call
        .segments
        .first()
        .copied()
        .ok_or_else(|| Error::Validation(format!("call {} has no segments", call.call_id)))?;
    let horizon = road
        .get(first.cell_position)
        .and_then(|s| block_end(s, slot_of(first.enter_time)))
        .ok_or_else(|| {
            Error::Validation(format!("call {} starts outside the road data", call.call_id))
        })?;
    while call.is_pending() {
        extend_one_hop(&mut call, corridor, road, params, rng, horizon)?;
    }
    Ok(call)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reconciled {
    pub kept: Vec<CallRecord>,
    pub dropped: Vec<CallRecord>,
}

/// Randomly removes handovers into `downstream` where its flow is lower than
/// the upstream flow in the slot of the handover.
///
/// A handover entering in a slot with upstream flow `f_u` and downstream flow
/// `f_d < f_u` survives with probability `f_d / f_u`; all handovers are
/// removed when `f_u` is zero. Dropped calls end at the cell boundary.
pub fn reconcile_flows<R: Rng + ?Sized>(
    upstream: &CellSite,
    downstream: &CellSite,
    handover_calls: Vec<CallRecord>,
    road: &[RoadSeries],
    rng: &mut R,
) -> Result<Reconciled> {
    if downstream.position != upstream.position + 1 {
        return Err(Error::Config(format!(
            "sites {} and {} are not adjacent",
            upstream.bs_id, downstream.bs_id
        )));
    }
    let (up, down) = match (road.get(upstream.position), road.get(downstream.position)) {
        (Some(u), Some(d)) => (u, d),
        _ => {
            return Err(Error::Validation(format!(
                "missing road series for {} or {}",
                upstream.bs_id, downstream.bs_id
            )))
        }
    };

    let mut out = Reconciled::default();
    for mut call in handover_calls {
        let last = call.last_segment();
        if last.cell_position != upstream.position || !call.is_pending() {
            return Err(Error::Validation(format!(
                "call {} is not awaiting a handover from {}",
                call.call_id, upstream.bs_id
            )));
        }
        let slot = slot_of(last.leave_or_end_time);
        let (f_u, f_d) = match (up.get(slot), down.get(slot)) {
            (Some(u), Some(d)) => (u.flow, d.flow),
            _ => {
                return Err(Error::CalendarMismatch(format!(
                    "slot {slot} missing for {} or {}",
                    upstream.bs_id, downstream.bs_id
                )))
            }
        };
        let p_drop = if f_u == 0 {
            1.0
        } else if f_d < f_u {
            1.0 - f_d as f64 / f_u as f64
        } else {
            0.0
        };
        if p_drop > 0.0 && rng.random::<f64>() < p_drop {
            call.termination = Termination::LeftHighway;
            out.dropped.push(call);
        } else {
            out.kept.push(call);
        }
    }
    Ok(out)
}

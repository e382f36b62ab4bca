use rayon::prelude::*;

use super::handover::{block_end, close_segment};
use super::{
    dwell_time, extend_one_hop, gen_arrivals, gen_calls_for_transit, reconcile_flows, slot_of,
    CallRecord, CellSeries, GenParams, SegmentKind, Termination, VehicleTransit,
};
use crate::error::{Error, Result, ResultExt};
use crate::rng::{stream, Phase};
use crate::road_data::{Corridor, RoadSeries};

/// Generated load for a corridor.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    /// One series per site, in corridor order.
    pub cells: Vec<CellSeries>,
    /// Every call, ordered by `call_id`.
    pub calls: Vec<CallRecord>,
}

const ID_SHIFT: u32 = 40;

/// Generates new and handover call arrivals for every site.
///
/// `road[k]` describes the vehicles crossing cell `k`: its flow in slot `t`
/// is the number of vehicles entering the cell during `t`, and its speed
/// sets their dwell time. All series must cover the same slots.
///
/// New calls are generated per site on independent streams keyed by
/// `(seed, site)`; handovers are then propagated in corridor order, one
/// stream per receiving site, so the result does not depend on scheduling.
pub fn generate(corridor: &Corridor, road: &[RoadSeries], params: &GenParams) -> Result<Generated> {
    params.validate()?;
    check_calendar(corridor, road)?;

    // Horizon per slot: end of the run of consecutive slots it belongs to.
    let reference = &road[0];
    let mut horizons = vec![0.0; reference.len()];
    {
        let mut i = reference.len();
        while i > 0 {
            i -= 1;
            horizons[i] = if i + 1 < reference.len()
                && reference.slots[i + 1].slot_index == reference.slots[i].slot_index + 1
            {
                horizons[i + 1]
            } else {
                block_end(reference, reference.slots[i].slot_index).expect("slot present")
            };
        }
    }

    let mut per_site: Vec<Vec<CallRecord>> = corridor
        .sites()
        .par_iter()
        .map(|site| {
            new_calls_for_site(site.position, site.range_miles, &road[site.position], &horizons, params)
                .context(|| format!("generating new calls at {}", site.bs_id))
        })
        .collect::<Result<_>>()?;

    // Handover pass, upstream to downstream. `carried` holds calls handed
    // into site k that are still active when their vehicle leaves it.
    let mut carried: Vec<(usize, usize)> = Vec::new();
    for k in 0..corridor.len() {
        let mut pending = std::mem::take(&mut carried);
        pending.extend(
            per_site[k]
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_pending())
                .map(|(i, _)| (k, i)),
        );
        if pending.is_empty() {
            continue;
        }
        if k + 1 == corridor.len() {
            for (owner, i) in pending {
                per_site[owner][i].termination = Termination::CorridorExit;
            }
            continue;
        }
        pending.sort_by(|a, b| {
            let ca = &per_site[a.0][a.1];
            let cb = &per_site[b.0][b.1];
            ca.last_segment()
                .leave_or_end_time
                .total_cmp(&cb.last_segment().leave_or_end_time)
                .then(ca.call_id.cmp(&cb.call_id))
        });

        let mut rng = stream(params.seed, (k + 1) as u64, Phase::Handover);
        let up = &corridor.sites()[k];
        let down = &corridor.sites()[k + 1];

        // Calls cut by the horizon or landing in a slot outside the data stop here.
        let mut candidates = Vec::with_capacity(pending.len());
        for &(owner, i) in &pending {
            let call = &mut per_site[owner][i];
            let enter = call.last_segment().leave_or_end_time;
            if road[k + 1].get(slot_of(enter)).is_none() {
                call.termination = Termination::Horizon;
            } else {
                candidates.push((owner, i));
            }
        }
        let batch: Vec<CallRecord> = candidates
            .iter()
            .map(|&(o, i)| per_site[o][i].clone())
            .collect();
        let reconciled = reconcile_flows(up, down, batch, road, &mut rng)
            .context(|| format!("reconciling flows {} -> {}", up.bs_id, down.bs_id))?;

        let dropped: std::collections::HashSet<u64> =
            reconciled.dropped.iter().map(|c| c.call_id).collect();
        for &(owner, i) in &candidates {
            let call = &mut per_site[owner][i];
            if dropped.contains(&call.call_id) {
                call.termination = Termination::LeftHighway;
                continue;
            }
            let horizon = horizons[road[0]
                .position(slot_of(call.start_time))
                .expect("call starts inside the data")];
            extend_one_hop(call, corridor, road, params, &mut rng, horizon)
                .context(|| format!("handover {} -> {}", up.bs_id, down.bs_id))?;
            if call.is_pending() {
                carried.push((owner, i));
            }
        }
    }

    let cells = count_arrivals(corridor, road, &per_site)?;
    let mut calls: Vec<CallRecord> = per_site.into_iter().flatten().collect();
    calls.sort_by_key(|c| c.call_id);
    Ok(Generated { cells, calls })
}

fn check_calendar(corridor: &Corridor, road: &[RoadSeries]) -> Result<()> {
    if road.len() != corridor.len() {
        return Err(Error::CalendarMismatch(format!(
            "{} road series for {} sites",
            road.len(),
            corridor.len()
        )));
    }
    for (site, series) in corridor.sites().iter().zip(road) {
        if series.detector_id != site.detector_id {
            return Err(Error::UnknownDetector(format!(
                "{} (site {} expects detector {})",
                series.detector_id, site.bs_id, site.detector_id
            )));
        }
        if series.is_empty() {
            return Err(Error::Validation(format!("road series for {} is empty", site.bs_id)));
        }
    }
    let reference = &road[0];
    for series in &road[1..] {
        let same = series.origin == reference.origin
            && series.len() == reference.len()
            && series
                .slots
                .iter()
                .zip(&reference.slots)
                .all(|(a, b)| a.slot_index == b.slot_index);
        if !same {
            return Err(Error::CalendarMismatch(format!(
                "detector {} does not cover the same slots as {}",
                series.detector_id, reference.detector_id
            )));
        }
    }
    Ok(())
}

fn new_calls_for_site(
    position: usize,
    range_miles: f64,
    series: &RoadSeries,
    horizons: &[f64],
    params: &GenParams,
) -> Result<Vec<CallRecord>> {
    let mut rng = stream(params.seed, position as u64, Phase::VehicleArrivals);
    let base = (position as u64) << ID_SHIFT;
    let mut vehicle = 0u64;
    let mut calls = Vec::new();
    for (slot, &horizon) in series.slots.iter().zip(horizons) {
        for arrival in gen_arrivals(slot, &mut rng) {
            let dwell = dwell_time(range_miles, slot.speed, params, &mut rng)
                .context(|| format!("slot {}", slot.slot_index))?;
            let transit = VehicleTransit::new(base + vehicle, position, arrival, dwell);
            vehicle += 1;
            for mut call in gen_calls_for_transit(&transit, params, &mut rng) {
                if call.start_time >= horizon {
                    continue;
                }
                let (leave, termination) =
                    close_segment(call.end_time(), transit.departure_time, horizon);
                call.segments[0].leave_or_end_time = leave;
                call.termination = termination;
                call.call_id = base + calls.len() as u64;
                calls.push(call);
            }
        }
    }
    Ok(calls)
}

fn count_arrivals(
    corridor: &Corridor,
    road: &[RoadSeries],
    per_site: &[Vec<CallRecord>],
) -> Result<Vec<CellSeries>> {
    let mut cells: Vec<CellSeries> = corridor
        .sites()
        .iter()
        .zip(road)
        .map(|(site, series)| CellSeries::zeros(site.bs_id.clone(), series.slot_indices()))
        .collect();
    for call in per_site.iter().flatten() {
        for seg in &call.segments {
            let cell = &mut cells[seg.cell_position];
            let pos = cell.position(slot_of(seg.enter_time)).ok_or_else(|| {
                Error::Validation(format!(
                    "call {} enters {} outside the road data",
                    call.call_id, cell.bs_id
                ))
            })?;
            match seg.kind {
                SegmentKind::New => cell.new_calls[pos] += 1,
                SegmentKind::Handover => cell.handover_calls[pos] += 1,
            }
            cell.total_calls[pos] += 1;
        }
    }
    Ok(cells)
}

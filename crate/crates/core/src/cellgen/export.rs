use std::io::{BufRead, BufReader, Read, Write};

use super::{CallRecord, CellSeries};
use crate::error::{Error, Result};

const HEADER: &str = "slot_index,new_calls,handover_calls,total_calls";

pub fn write_cell_csv(cell: &CellSeries, mut out: impl Write) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    for i in 0..cell.len() {
        writeln!(
            out,
            "{},{},{},{}",
            cell.slot_index[i], cell.new_calls[i], cell.handover_calls[i], cell.total_calls[i]
        )?;
    }
    Ok(())
}

pub fn read_cell_csv(bs_id: &str, input: impl Read) -> Result<CellSeries> {
    let mut cell = CellSeries::zeros(bs_id, Vec::new());
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != HEADER {
        return Err(Error::Validation(format!("unexpected cell series header `{header}`")));
    }
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<u64> = line
            .split(',')
            .map(|f| f.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Validation(format!("line {}: {e}", n + 2)))?;
        if fields.len() != 4 {
            return Err(Error::Validation(format!("line {}: expected 4 fields", n + 2)));
        }
        cell.slot_index.push(fields[0] as usize);
        cell.new_calls.push(fields[1] as u32);
        cell.handover_calls.push(fields[2] as u32);
        cell.total_calls.push(fields[3] as u32);
    }
    if !cell.totals_consistent() {
        return Err(Error::Validation(format!("{bs_id}: total_calls != new + handover")));
    }
    Ok(cell)
}

/// One JSON object per line, in `call_id` order.
pub fn write_call_log<'a>(
    calls: impl IntoIterator<Item = &'a CallRecord>,
    mut out: impl Write,
) -> Result<()> {
    for call in calls {
        serde_json::to_writer(&mut out, call)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

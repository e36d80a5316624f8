//! Trace and metrics serialization.
//!
//! Channels are written with their 1-based numbers.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sim::engine::SlotTrace;
use crate::sim::metrics::MetricsReport;

pub const TRACE_HEADER: [&str; 5] = ["slot", "cbsd_id", "tier", "channel", "retained"];
pub const SERIES_HEADER: [&str; 4] = ["slot", "moves", "satisfaction", "max_interference"];

/// One row per `(slot, cbsd, channel)` assignment, ordered by slot, cbsd, channel.
/// `retained` is 1 when the CBSD also held the channel in the previous slot.
pub fn write_trace_csv<W: Write>(trace: &SlotTrace, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(TRACE_HEADER)?;
    for (i, rec) in trace.records.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &trace.records[p].state);
        for (k, tier, set) in rec.state.rows() {
            for s in set.iter() {
                let retained = prev.is_some_and(|p| p.holds(k, s));
                wtr.write_record([
                    rec.slot.to_string(),
                    k.to_string(),
                    tier.to_string(),
                    s.number().to_string(),
                    u8::from(retained).to_string(),
                ])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}

pub fn trace_csv_bytes(trace: &SlotTrace) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    Ok(buf)
}

pub fn write_series_csv<W: Write>(report: &MetricsReport, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SERIES_HEADER)?;
    for row in &report.series {
        wtr.write_record([
            row.slot.to_string(),
            row.moves.to_string(),
            format!("{:?}", row.satisfaction),
            format!("{:?}", row.max_interference),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("series", e))?;
    Ok(())
}

/// Key/value metrics document.
pub fn metrics_text(report: &MetricsReport) -> Result<String> {
    let mut text = String::from("# channel allocation run metrics\n");
    if report.allocator == "oracle" {
        text.push_str(
            "# oracle feasibility is always mutual: every co-channel GAA stays within gamma\n",
        );
    }
    let body = toml::to_string(report)
        .map_err(|e| Error::Config(format!("cannot serialize metrics: {e}")))?;
    text.push_str(&body);
    Ok(text)
}

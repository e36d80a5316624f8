//! Continuity, service, interference and fairness metrics over a trace.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interference::cochannel_interference;
use crate::model::{CbsdId, ChannelSet, Tier};
use crate::oracle::is_move;
use crate::sim::engine::SlotTrace;

/// Per-slot values for the time-series output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub slot: u32,
    pub moves: u32,
    pub satisfaction: f64,
    pub max_interference: f64,
}

/// Lifetime totals for one CBSD.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CbsdMetrics {
    pub tier: Tier,
    pub moves: u32,
    pub demand: u64,
    pub served: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub allocator: String,
    pub feasibility: String,
    pub slots: u32,
    pub moves_total: u32,
    pub moves_pal: u32,
    pub moves_gaa: u32,
    pub demand_total: u64,
    pub served_total: u64,
    pub blocked_total: u64,
    pub satisfaction: f64,
    pub interference_mean: f64,
    pub interference_max: f64,
    pub jain_index: f64,
    pub violations: u64,
    /// Keyed by decimal CBSD id.
    pub per_cbsd: BTreeMap<String, CbsdMetrics>,
    #[serde(skip)]
    pub series: Vec<SlotMetrics>,
}

/// Jain's index `(sum x)^2 / (n * sum x^2)`; 1 for an empty or all-zero input.
pub fn jain_index(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|x| x * x).sum();
    if values.is_empty() || sum_sq == 0.0 {
        return 1.0;
    }
    (sum * sum) / (values.len() as f64 * sum_sq)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(trace: &SlotTrace) -> Result<MetricsReport> {
    if trace.records.is_empty() {
        return Err(Error::Config("cannot compute metrics of an empty trace".into()));
    }
    let mut per_cbsd: BTreeMap<CbsdId, CbsdMetrics> = BTreeMap::new();
    let mut series = Vec::with_capacity(trace.records.len());
    let (mut moves_pal, mut moves_gaa) = (0u32, 0u32);
    let (mut demand_total, mut served_total) = (0u64, 0u64);
    let (mut interference_sum, mut interference_max, mut interference_n) = (0.0f64, 0.0f64, 0u64);

    for (i, rec) in trace.records.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &trace.records[p].state);
        let mut slot_moves = 0;
        let mut slot_max = 0.0f64;
        for &(k, tier, demand) in &rec.demands {
            let served = rec.served(k);
            let entry = per_cbsd.entry(k).or_insert(CbsdMetrics {
                tier,
                moves: 0,
                demand: 0,
                served: 0,
            });
            entry.demand += u64::from(demand);
            entry.served += u64::from(served);

            let now = rec.state.channels_of(k).unwrap_or(ChannelSet::empty());
            if let Some(before) = prev.and_then(|p| p.channels_of(k).ok()) {
                if is_move(before, now, demand) {
                    entry.moves += 1;
                    slot_moves += 1;
                    match tier {
                        Tier::Pal => moves_pal += 1,
                        Tier::Gaa => moves_gaa += 1,
                    }
                }
            }
            if tier == Tier::Gaa {
                for s in now.iter() {
                    let received = cochannel_interference(&rec.state, k, s, &trace.r)?;
                    interference_sum += received;
                    interference_n += 1;
                    slot_max = slot_max.max(received);
                }
            }
        }
        interference_max = interference_max.max(slot_max);
        demand_total += rec.total_demand();
        served_total += rec.total_served();
        series.push(SlotMetrics {
            slot: rec.slot,
            moves: slot_moves,
            satisfaction: ratio(rec.total_served(), rec.total_demand()),
            max_interference: slot_max,
        });
    }

    let lifetime: Vec<f64> = per_cbsd
        .values()
        .filter(|m| m.demand > 0)
        .map(|m| ratio(m.served, m.demand))
        .collect();

    Ok(MetricsReport {
        scenario: trace.scenario.clone(),
        allocator: trace.allocator.clone(),
        feasibility: trace.mode.as_str().to_string(),
        slots: trace.records.len() as u32,
        moves_total: moves_pal + moves_gaa,
        moves_pal,
        moves_gaa,
        demand_total,
        served_total,
        blocked_total: demand_total - served_total,
        satisfaction: ratio(served_total, demand_total),
        interference_mean: if interference_n == 0 {
            0.0
        } else {
            interference_sum / interference_n as f64
        },
        interference_max,
        jain_index: jain_index(&lifetime),
        violations: trace.violation_count() as u64,
        per_cbsd: per_cbsd
            .into_iter()
            .map(|(k, m)| (k.to_string(), m))
            .collect(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fig2;
    use crate::sim::engine::{run_simulation, AllocatorChoice, RunOptions};

    #[test]
    fn jain_hand_values() {
        assert_eq!(jain_index(&[1.0]), 1.0);
        assert_eq!(jain_index(&[1.0, 0.0]), 0.5);
        assert_eq!(jain_index(&[0.5, 0.5, 0.5]), 1.0);
        assert_eq!(jain_index(&[]), 1.0);
        assert_eq!(jain_index(&[0.0, 0.0]), 1.0);
        // (1 + 0.5)^2 / (2 * 1.25) = 0.9
        assert!((jain_index(&[1.0, 0.5]) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn fig2_metrics() {
        let trace = run_simulation(&fig2(), AllocatorChoice::Mtc, RunOptions::default()).unwrap();
        let m = compute_metrics(&trace).unwrap();
        assert_eq!(m.moves_gaa, 0);
        assert_eq!(m.moves_pal, 0);
        assert_eq!(m.satisfaction, 1.0);
        assert_eq!(m.demand_total, 7);
        assert_eq!(m.blocked_total, 0);
        assert_eq!(m.jain_index, 1.0);
        // slot 1: GAA2 and GAA3 each hear 0.5 on CH5, GAA1 is alone on CH6
        assert_eq!(m.interference_max, 0.5);
        assert!((m.interference_mean - 0.25).abs() < 1e-12);
        assert_eq!(m.series.len(), 2);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let mut trace = run_simulation(&fig2(), AllocatorChoice::Mtc, RunOptions::default()).unwrap();
        trace.records.clear();
        assert!(compute_metrics(&trace).is_err());
    }
}

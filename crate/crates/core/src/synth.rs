//! Seeded random scenarios for property checks and benchmarks.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::interference::{build_interference_matrix, FeasibilityMode, InterferenceMatrix, PropagationModel};
use crate::model::{Cbsd, CbsdId, ChannelId, ChannelPool, ChannelSet, DemandSchedule, Tier};
use crate::sim::engine::Scenario;
use crate::sim::event::{Event, EventKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_channels: usize,
    pub max_cbsds: usize,
    pub max_slots: u32,
    /// No arrivals, departures, demand changes or grant changes after slot 0.
    pub frozen: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_channels: 20,
            max_cbsds: 30,
            max_slots: 50,
            frozen: false,
        }
    }
}

fn random_subset<R: Rng + ?Sized>(rng: &mut R, total: usize, p: f64) -> ChannelSet {
    (0..total)
        .filter(|_| rng.gen_bool(p))
        .map(ChannelId)
        .collect()
}

/// Random symmetric `R` over `gaas`: dense random levels or a power law.
fn random_interference<R: Rng + ?Sized>(rng: &mut R, gaas: &[Cbsd]) -> InterferenceMatrix {
    let gamma = *[0.0, 0.25, 0.5, 1.0, 1.5, 3.0].choose(rng).expect("non-empty");
    if rng.gen_bool(0.5) {
        let model = PropagationModel::PowerLaw {
            tx_power: 100.0,
            exponent: rng.gen_range(2.0..4.0),
            min_distance: 1.0,
        };
        return build_interference_matrix(gaas, model, gamma).expect("positions are set");
    }
    let n = gaas.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = match rng.gen_range(0..4) {
                0 => 0.0,
                1 => *[0.25, 0.5, 1.0, 2.0].choose(rng).expect("non-empty"),
                _ => rng.gen_range(0.0..2.0),
            };
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    InterferenceMatrix::from_dense(gaas.iter().map(|g| g.id).collect(), values, gamma)
        .expect("symmetric by construction")
}

/// A random scenario within `limits`.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, limits: Limits) -> Scenario {
    let total = rng.gen_range(1..=limits.max_channels);
    let horizon = rng.gen_range(1..=limits.max_slots);
    let pal = random_subset(rng, total, 0.4);
    let gaa = random_subset(rng, total, 0.7);
    let pool = ChannelPool::new(total, pal, gaa).expect("subsets of the universe");

    let n = rng.gen_range(0..=limits.max_cbsds);
    let mut roster = Vec::with_capacity(n);
    for i in 0..n {
        let tier = if rng.gen_bool(0.35) { Tier::Pal } else { Tier::Gaa };
        let mut cbsd = Cbsd::new(i as u32 + 1, tier, 0).at(rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0));
        if limits.frozen {
            cbsd.demand = DemandSchedule::Constant(rng.gen_range(0..=3));
        } else {
            cbsd.arrival = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..horizon) };
            if rng.gen_bool(0.3) {
                cbsd.departure = Some(rng.gen_range(cbsd.arrival + 1..=horizon));
            }
            cbsd.demand = if rng.gen_bool(0.6) {
                DemandSchedule::Constant(rng.gen_range(0..=3))
            } else {
                let mut slot = cbsd.arrival;
                let mut steps = vec![(slot, rng.gen_range(0..=3))];
                while slot + 1 < horizon && steps.len() < 4 {
                    slot = rng.gen_range(slot + 1..horizon);
                    steps.push((slot, rng.gen_range(0..=3)));
                    if rng.gen_bool(0.5) {
                        break;
                    }
                }
                DemandSchedule::Steps(steps)
            };
        }
        roster.push(cbsd);
    }

    let gaas: Vec<Cbsd> = roster.iter().filter(|c| c.tier == Tier::Gaa).cloned().collect();
    let r = random_interference(rng, &gaas);

    let initial_available = random_subset(rng, total, 0.7);
    let mut events = Vec::new();
    if !limits.frozen {
        let churn = rng.gen_range(0.0..0.6);
        for slot in 1..horizon {
            if rng.gen_bool(churn) {
                events.push(Event::new(slot, EventKind::AvailabilitySet(random_subset(rng, total, 0.7))));
            }
        }
    }

    Scenario {
        name: "random".into(),
        pool: Arc::new(pool),
        initial_available,
        r: Arc::new(r),
        mode: if rng.gen_bool(0.5) {
            FeasibilityMode::Literal
        } else {
            FeasibilityMode::Mutual
        },
        roster,
        events,
        horizon,
        seed: rng.gen(),
    }
}

/// A steady-state benchmark: every CBSD active throughout with demand 1, a
/// power-law `R` over random positions, and the grant redrawn each slot.
pub fn load_scenario<R: Rng + ?Sized>(rng: &mut R, slots: u32, cbsds: usize, channels: usize) -> Scenario {
    let pal: ChannelSet = (0..channels / 3).map(ChannelId).collect();
    let gaa: ChannelSet = (channels / 3..channels).map(ChannelId).collect();
    let pool = ChannelPool::new(channels, pal, gaa).expect("valid layout");
    let roster: Vec<Cbsd> = (0..cbsds)
        .map(|i| {
            let tier = if i % 5 == 0 { Tier::Pal } else { Tier::Gaa };
            Cbsd::new(i as u32 + 1, tier, 1).at(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0))
        })
        .collect();
    let gaas: Vec<Cbsd> = roster.iter().filter(|c| c.tier == Tier::Gaa).cloned().collect();
    let model = PropagationModel::PowerLaw {
        tx_power: 1e4,
        exponent: 3.0,
        min_distance: 1.0,
    };
    let r = build_interference_matrix(&gaas, model, 1.0).expect("positions are set");
    let mut events = Vec::new();
    for slot in 1..slots {
        if rng.gen_bool(0.2) {
            events.push(Event::new(slot, EventKind::AvailabilitySet(random_subset(rng, channels, 0.85))));
        }
    }
    Scenario {
        name: "load".into(),
        pool: Arc::new(pool),
        initial_available: ChannelSet::full(channels),
        r: Arc::new(r),
        mode: FeasibilityMode::Literal,
        roster,
        events,
        horizon: slots,
        seed: 0,
    }
}

/// Ids of every CBSD in `scenario` that is a GAA.
pub fn gaa_ids(scenario: &Scenario) -> Vec<CbsdId> {
    scenario
        .roster
        .iter()
        .filter(|c| c.tier == Tier::Gaa)
        .map(|c| c.id)
        .collect()
}

//! The slot loop: apply events, allocate, validate, record.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::allocator::{Allocator, GreedyFill, Mtc, SlotEnvironment};
use crate::error::{Error, Result};
use crate::interference::{FeasibilityMode, InterferenceMatrix};
use crate::model::{AllocationState, Cbsd, CbsdId, ChannelPool, ChannelSet, Tier};
use crate::oracle::{validate_allocation, BruteForce, RandomFill, Violation};
use crate::sim::event::{apply_events, apply_in_place, sort_events, Event, EventKind};

/// A validated, ready-to-run scenario. Channel ids are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub pool: Arc<ChannelPool>,
    /// Grant in force from slot 0 until the first availability event.
    pub initial_available: ChannelSet,
    pub r: Arc<InterferenceMatrix>,
    pub mode: FeasibilityMode,
    /// Every CBSD that may appear, ascending id.
    pub roster: Vec<Cbsd>,
    /// Explicit events, in file order.
    pub events: Vec<Event>,
    pub horizon: u32,
    pub seed: u64,
}

impl Scenario {
    pub fn cbsd(&self, k: CbsdId) -> Option<&Cbsd> {
        self.roster
            .binary_search_by_key(&k, |c| c.id)
            .ok()
            .map(|i| &self.roster[i])
    }

    /// Roster-derived arrivals, departures and demand changes followed by the
    /// explicit events, sorted into processing order.
    pub fn timeline(&self) -> Vec<Event> {
        let mut out = Vec::new();
        for cbsd in &self.roster {
            out.push(Event::new(cbsd.arrival, EventKind::Arrival(cbsd.clone())));
            if let Some(dep) = cbsd.departure {
                out.push(Event::new(dep, EventKind::Departure(cbsd.id)));
            }
            for slot in cbsd.demand.change_points(cbsd.arrival, cbsd.departure) {
                out.push(Event::new(
                    slot,
                    EventKind::DemandSet {
                        cbsd: cbsd.id,
                        demand: cbsd.demand.at(slot),
                    },
                ));
            }
        }
        out.extend(self.events.iter().cloned());
        sort_events(&mut out);
        out
    }

    pub fn with_mode(mut self, mode: FeasibilityMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Which allocator drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocatorChoice {
    Mtc,
    Greedy,
    Random { seed: u64 },
    Oracle,
}

impl AllocatorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            AllocatorChoice::Mtc => "mtc",
            AllocatorChoice::Greedy => "greedy",
            AllocatorChoice::Random { .. } => "random",
            AllocatorChoice::Oracle => "oracle",
        }
    }

    pub fn build(&self) -> Box<dyn Allocator + Send> {
        match *self {
            AllocatorChoice::Mtc => Box::new(Mtc),
            AllocatorChoice::Greedy => Box::new(GreedyFill),
            AllocatorChoice::Random { seed } => Box::new(RandomFill::new(seed)),
            AllocatorChoice::Oracle => Box::new(BruteForce),
        }
    }

    /// Parses an allocator name; `random` takes `seed`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "mtc" => Ok(AllocatorChoice::Mtc),
            "greedy" => Ok(AllocatorChoice::Greedy),
            "random" => Ok(AllocatorChoice::Random { seed }),
            "oracle" => Ok(AllocatorChoice::Oracle),
            other => Err(Error::Config(format!(
                "unknown allocator `{other}` (expected mtc, random, greedy or oracle)"
            ))),
        }
    }
}

impl fmt::Display for AllocatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AllocatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AllocatorChoice::parse(s, 0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the scenario horizon.
    pub horizon: Option<u32>,
    /// Abort on the first slot with a constraint violation.
    pub strict: bool,
}

/// One simulated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u32,
    pub available: ChannelSet,
    /// `(cbsd, tier, d_k(t))` for every active CBSD, ascending id.
    pub demands: Vec<(CbsdId, Tier, u32)>,
    pub state: AllocationState,
    pub violations: Vec<Violation>,
}

impl SlotRecord {
    pub fn demand_of(&self, k: CbsdId) -> u32 {
        self.demands
            .binary_search_by_key(&k, |(id, ..)| *id)
            .map_or(0, |i| self.demands[i].2)
    }

    /// Demand units actually served for `k`.
    pub fn served(&self, k: CbsdId) -> u32 {
        let held = self.state.allocated_count(k).unwrap_or(0);
        held.min(self.demand_of(k))
    }

    pub fn blocked(&self, k: CbsdId) -> u32 {
        self.demand_of(k) - self.served(k)
    }

    pub fn total_demand(&self) -> u64 {
        self.demands.iter().map(|d| u64::from(d.2)).sum()
    }

    pub fn total_served(&self) -> u64 {
        self.demands.iter().map(|d| u64::from(self.served(d.0))).sum()
    }
}

/// The full record of one run, one [`SlotRecord`] per slot from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub scenario: String,
    pub allocator: String,
    pub mode: FeasibilityMode,
    pub r: Arc<InterferenceMatrix>,
    pub records: Vec<SlotRecord>,
}

impl SlotTrace {
    pub fn state_at(&self, slot: u32) -> Option<&AllocationState> {
        self.records.get(slot as usize).map(|r| &r.state)
    }

    pub fn violation_count(&self) -> usize {
        self.records.iter().map(|r| r.violations.len()).sum()
    }
}

/// Runs `scenario` for `horizon` slots with the chosen allocator.
pub fn run_simulation(
    scenario: &Scenario,
    choice: AllocatorChoice,
    options: RunOptions,
) -> Result<SlotTrace> {
    let mut allocator = choice.build();
    let mut trace = run_with(scenario, allocator.as_mut(), options)?;
    trace.allocator = choice.name().to_string();
    Ok(trace)
}

/// Runs `scenario` with any [`Allocator`].
pub fn run_with(
    scenario: &Scenario,
    allocator: &mut dyn Allocator,
    options: RunOptions,
) -> Result<SlotTrace> {
    let horizon = options.horizon.unwrap_or(scenario.horizon);
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let timeline = scenario.timeline();
    let mut cursor = 0;
    let mut take_slot = |t: u32| {
        let start = cursor;
        while cursor < timeline.len() && timeline[cursor].slot <= t {
            cursor += 1;
        }
        timeline[start..cursor]
            .iter()
            .filter(|e| e.slot == t)
            .cloned()
            .collect::<Vec<_>>()
    };

    let mut env = SlotEnvironment::new(0, scenario.pool.clone(), scenario.r.clone(), scenario.mode);
    env.set_available(scenario.initial_available)?;
    apply_in_place(&mut env, &take_slot(0))?;

    let mut records: Vec<SlotRecord> = Vec::with_capacity(horizon as usize);
    let mut prev = env.zero_prior();
    for t in 0..horizon {
        if t > 0 {
            env = apply_events(&env, &take_slot(t))?;
        }
        let state = allocator.step(&env, &prev)?;
        let violations = validate_allocation(&env, &state)?;
        if options.strict && !violations.is_empty() {
            return Err(Error::Violations { slot: t, violations });
        }
        records.push(SlotRecord {
            slot: t,
            available: env.available,
            demands: env.active().map(|(k, c)| (k, c.tier, c.demand)).collect(),
            state: state.clone(),
            violations,
        });
        prev = state;
    }

    Ok(SlotTrace {
        scenario: scenario.name.clone(),
        allocator: allocator.name().to_string(),
        mode: scenario.mode,
        r: scenario.r.clone(),
        records,
    })
}

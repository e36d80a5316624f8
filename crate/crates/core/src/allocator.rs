//! Per-slot MTC allocation.
//!
//! Each slot runs the tier-sequential pass twice, PALs first and GAAs second.
//! Within a tier the pass retains channels CBSDs already held at `t - 1`
//! (Allocated), then re-places CBSDs that lost a channel (Moved), then fills
//! outstanding demand (Remaining). Every placement picks the most suitable
//! channel: for a PAL the available channel that displaces the fewest GAAs,
//! for a GAA the feasible channel with the least co-channel interference.
//!
//! Ties are broken by lowest channel index, then lowest CBSD id.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interference::{cochannel_interference, feasible_for_gaa, FeasibilityMode, InterferenceMatrix};
use crate::model::{unmet_demand, AllocationState, CbsdId, ChannelId, ChannelPool, ChannelSet, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveCbsd {
    pub tier: Tier,
    pub demand: u32,
}

/// Everything the allocator sees at slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEnvironment {
    pub t: u32,
    /// Channels granted by the SAS for this slot.
    pub available: ChannelSet,
    pub pool: Arc<ChannelPool>,
    pub r: Arc<InterferenceMatrix>,
    pub mode: FeasibilityMode,
    active: BTreeMap<CbsdId, ActiveCbsd>,
}

impl SlotEnvironment {
    pub fn new(
        t: u32,
        pool: Arc<ChannelPool>,
        r: Arc<InterferenceMatrix>,
        mode: FeasibilityMode,
    ) -> Self {
        SlotEnvironment {
            t,
            available: ChannelSet::empty(),
            pool,
            r,
            mode,
            active: BTreeMap::new(),
        }
    }

    pub fn with_available(mut self, available: ChannelSet) -> Result<Self> {
        self.set_available(available)?;
        Ok(self)
    }

    pub fn with_cbsd(mut self, k: u32, tier: Tier, demand: u32) -> Result<Self> {
        self.activate(CbsdId(k), tier, demand)?;
        Ok(self)
    }

    pub fn set_available(&mut self, available: ChannelSet) -> Result<()> {
        self.pool.check_set(available)?;
        self.available = available;
        Ok(())
    }

    pub fn activate(&mut self, k: CbsdId, tier: Tier, demand: u32) -> Result<()> {
        if self.active.contains_key(&k) {
            return Err(Error::Event {
                slot: self.t,
                message: format!("CBSD {k} is already active"),
            });
        }
        self.active.insert(k, ActiveCbsd { tier, demand });
        Ok(())
    }

    pub fn deactivate(&mut self, k: CbsdId) -> Result<()> {
        self.active.remove(&k).map(|_| ()).ok_or(Error::Event {
            slot: self.t,
            message: format!("CBSD {k} is not active"),
        })
    }

    pub fn set_demand(&mut self, k: CbsdId, demand: u32) -> Result<()> {
        let slot = self.t;
        let entry = self.active.get_mut(&k).ok_or(Error::Event {
            slot,
            message: format!("CBSD {k} is not active"),
        })?;
        entry.demand = demand;
        Ok(())
    }

    pub fn is_active(&self, k: CbsdId) -> bool {
        self.active.contains_key(&k)
    }

    /// `d_k(t)`; zero for inactive CBSDs.
    pub fn demand(&self, k: CbsdId) -> u32 {
        self.active.get(&k).map_or(0, |c| c.demand)
    }

    pub fn tier(&self, k: CbsdId) -> Option<Tier> {
        self.active.get(&k).map(|c| c.tier)
    }

    /// Active CBSDs in ascending id order.
    pub fn active(&self) -> impl Iterator<Item = (CbsdId, ActiveCbsd)> + '_ {
        self.active.iter().map(|(k, c)| (*k, *c))
    }

    pub fn active_of(&self, tier: Tier) -> Vec<CbsdId> {
        self.active
            .iter()
            .filter(|(_, c)| c.tier == tier)
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn total_demand(&self) -> u64 {
        self.active.values().map(|c| u64::from(c.demand)).sum()
    }

    /// An all-zero state with a row for every active CBSD.
    pub fn blank_state(&self) -> AllocationState {
        AllocationState::with_members(
            self.t,
            self.pool.total(),
            self.active.iter().map(|(k, c)| (*k, c.tier)),
        )
    }

    /// The all-zero prior used for slot `t` when nothing carries over.
    pub fn zero_prior(&self) -> AllocationState {
        AllocationState::new(self.t.saturating_sub(1), self.pool.total())
    }

    pub fn unmet_demand(&self, state: &AllocationState, k: CbsdId) -> Result<u32> {
        unmet_demand(state, k, self.demand(k))
    }

    /// Checks that `prev` is a valid predecessor of this slot.
    pub fn check_prior(&self, prev: &AllocationState) -> Result<()> {
        if prev.total_channels() != self.pool.total() {
            return Err(Error::Config(format!(
                "prior state spans {} channels, pool has {}",
                prev.total_channels(),
                self.pool.total()
            )));
        }
        if self.t == 0 {
            if prev.is_empty() {
                return Ok(());
            }
            return Err(Error::Config(
                "slot 0 must start from the all-zero prior".into(),
            ));
        }
        if prev.slot() + 1 != self.t {
            return Err(Error::SlotMismatch {
                expected: self.t - 1,
                found: prev.slot(),
            });
        }
        Ok(())
    }
}

/// The CBSD set, eligible channels and tier for one tier-sequential pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierInput {
    pub tier: Tier,
    pub cbsds: Vec<CbsdId>,
    pub eligible: ChannelSet,
}

impl TierInput {
    pub fn new(env: &SlotEnvironment, tier: Tier) -> Self {
        TierInput {
            tier,
            cbsds: env.active_of(tier),
            eligible: env.pool.eligible(tier),
        }
    }

    fn includes(&self, k: CbsdId) -> bool {
        self.cbsds.binary_search(&k).is_ok()
    }
}

/// How a tier's CBSDs entered the slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    /// Retained `(cbsd, channel)` pairs, in retention order.
    pub allocated: Vec<(CbsdId, ChannelId)>,
    /// One entry per lost channel, ordered by (cbsd, channel).
    pub moved: Vec<CbsdId>,
    /// Members with demand left after retention, ascending id.
    pub remaining: Vec<CbsdId>,
}

/// Order in which last slot's pairs are offered for retention.
///
/// PAL pairs go by (channel, cbsd). GAA pairs replay last slot's assignment
/// order, so every GAA is re-checked against the same co-channel set it was
/// admitted against, or a subset of it.
fn retention_scan(prev: &AllocationState, input: &TierInput) -> Vec<(CbsdId, ChannelId)> {
    match input.tier {
        Tier::Pal => {
            let mut pairs: Vec<_> = prev
                .rows()
                .filter(|(k, tier, _)| *tier == Tier::Pal && input.includes(*k))
                .flat_map(|(k, _, set)| set.iter().map(move |s| (k, s)))
                .collect();
            pairs.sort_by_key(|&(k, s)| (s, k));
            pairs
        }
        Tier::Gaa => prev
            .gaa_order()
            .iter()
            .copied()
            .filter(|(k, _)| input.includes(*k))
            .collect(),
    }
}

/// Splits a tier into Allocated, Moved and Remaining against `working`.
pub fn classify(
    env: &SlotEnvironment,
    prev: &AllocationState,
    input: &TierInput,
    working: &AllocationState,
) -> Result<Classification> {
    let usable = env.available.intersection(input.eligible);
    let mut scratch = working.clone();
    let mut allocated = Vec::new();
    let mut lost = Vec::new();

    for (k, s) in retention_scan(prev, input) {
        if env.unmet_demand(&scratch, k)? == 0 {
            continue;
        }
        let keep = usable.contains(s)
            && s.0 < scratch.total_channels()
            && !scratch.occupied_by_pal(s)?
            && match input.tier {
                Tier::Pal => scratch.gaas_on(s).is_empty(),
                Tier::Gaa => feasible_for_gaa(&scratch, k, s, &env.r, env.mode)?,
            };
        if keep {
            scratch.assign(k, s)?;
            allocated.push((k, s));
        } else {
            lost.push((k, s));
        }
    }

    lost.sort();
    let mut remaining = Vec::new();
    for &k in &input.cbsds {
        if env.unmet_demand(&scratch, k)? > 0 {
            remaining.push(k);
        }
    }
    Ok(Classification {
        allocated,
        moved: lost.into_iter().map(|(k, _)| k).collect(),
        remaining,
    })
}

/// Picks the most suitable channel for `k`, or `None` when nothing fits.
pub fn msc(
    env: &SlotEnvironment,
    working: &AllocationState,
    prev: &AllocationState,
    k: CbsdId,
    input: &TierInput,
) -> Result<Option<ChannelId>> {
    let own = working.channels_of(k)?;
    let mut candidates = Vec::new();
    for s in input.eligible.intersection(env.available).difference(own).iter() {
        if !working.occupied_by_pal(s)? {
            candidates.push(s);
        }
    }

    match input.tier {
        Tier::Pal => Ok(candidates.into_iter().min_by_key(|&s| {
            if s.0 < prev.total_channels() {
                prev.gaas_on(s).len()
            } else {
                0
            }
        })),
        Tier::Gaa => {
            let mut best: Option<(ChannelId, f64)> = None;
            for s in candidates {
                if !feasible_for_gaa(working, k, s, &env.r, env.mode)? {
                    continue;
                }
                let cost = cochannel_interference(working, k, s, &env.r)?;
                if best.is_none_or(|(_, c)| cost < c) {
                    best = Some((s, cost));
                }
            }
            Ok(best.map(|(s, _)| s))
        }
    }
}

/// One tier-sequential pass over `input`, writing into `working`.
///
/// Demand that cannot be placed is left unserved for this slot.
pub fn tbsa(
    env: &SlotEnvironment,
    prev: &AllocationState,
    input: &TierInput,
    mut working: AllocationState,
) -> Result<AllocationState> {
    let class = classify(env, prev, input, &working)?;

    for &(k, s) in &class.allocated {
        working.assign(k, s)?;
    }

    for &k in &class.moved {
        if env.unmet_demand(&working, k)? == 0 {
            continue;
        }
        if let Some(s) = msc(env, &working, prev, k, input)? {
            working.assign(k, s)?;
        }
    }

    for &k in &class.remaining {
        for _ in 0..env.unmet_demand(&working, k)? {
            match msc(env, &working, prev, k, input)? {
                Some(s) => working.assign(k, s)?,
                None => break,
            }
        }
    }
    Ok(working)
}

fn pal_then_gaa(env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
    let working = env.blank_state();
    let working = tbsa(env, prev, &TierInput::new(env, Tier::Pal), working)?;
    tbsa(env, prev, &TierInput::new(env, Tier::Gaa), working)
}

/// Slot-`t` allocation from the slot `t - 1` state. Never mutates `prev`.
pub fn mtc_step(env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
    env.check_prior(prev)?;
    pal_then_gaa(env, prev)
}

/// Continuity-blind baseline: the same passes from an all-zero prior.
pub fn greedy_fill_allocator(env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
    env.check_prior(prev)?;
    pal_then_gaa(env, &env.zero_prior())
}

/// A per-slot allocation policy driven by the simulator.
pub trait Allocator {
    fn name(&self) -> &'static str;
    fn step(&mut self, env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mtc;

impl Allocator for Mtc {
    fn name(&self) -> &'static str {
        "mtc"
    }

    fn step(&mut self, env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
        mtc_step(env, prev)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyFill;

impl Allocator for GreedyFill {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn step(&mut self, env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
        greedy_fill_allocator(env, prev)
    }
}

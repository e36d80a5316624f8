//! Domain types shared by the allocator, the baselines and the simulator.
//!
//! Channels are identified by a 0-based [`ChannelId`]. Files and reports use
//! the 1-based `CHn` numbering; the conversion happens at the I/O boundary.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the channel universe. [`ChannelSet`] is a 64-bit mask.
pub const MAX_CHANNELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(pub usize);

impl ChannelId {
    /// 1-based label used in scenario files and reports.
    pub fn number(self) -> usize {
        self.0 + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        n.checked_sub(1).map(ChannelId)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CH{}", self.number())
    }
}

/// A set of channels, stored as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelSet(u64);

impl ChannelSet {
    pub const fn empty() -> Self {
        ChannelSet(0)
    }

    /// All channels `0..total`.
    pub fn full(total: usize) -> Self {
        debug_assert!(total <= MAX_CHANNELS);
        if total >= 64 {
            ChannelSet(u64::MAX)
        } else {
            ChannelSet((1u64 << total) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        ChannelSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, s: ChannelId) -> bool {
        s.0 < MAX_CHANNELS && self.0 & (1u64 << s.0) != 0
    }

    pub fn insert(&mut self, s: ChannelId) {
        self.0 |= 1u64 << s.0;
    }

    pub fn remove(&mut self, s: ChannelId) {
        self.0 &= !(1u64 << s.0);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & other.0)
    }

    pub fn union(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 | other.0)
    }

    pub fn difference(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ChannelSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Channels in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = ChannelId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let idx = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(ChannelId(idx))
        })
    }
}

impl FromIterator<ChannelId> for ChannelSet {
    fn from_iter<I: IntoIterator<Item = ChannelId>>(iter: I) -> Self {
        let mut set = ChannelSet::empty();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CbsdId(pub u32);

impl fmt::Display for CbsdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Pal,
    Gaa,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Pal => "PAL",
            Tier::Gaa => "GAA",
        })
    }
}

/// The channel universe and the per-tier eligibility sets.
///
/// `pal_set` and `gaa_set` may overlap. Per-slot availability is carried by
/// the slot environment, not the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPool {
    total: usize,
    pal_set: ChannelSet,
    gaa_set: ChannelSet,
}

impl ChannelPool {
    pub fn new(total: usize, pal_set: ChannelSet, gaa_set: ChannelSet) -> Result<Self> {
        if total == 0 || total > MAX_CHANNELS {
            return Err(Error::Config(format!(
                "channel total must be in 1..={MAX_CHANNELS}, got {total}"
            )));
        }
        let universe = ChannelSet::full(total);
        if !pal_set.is_subset(universe) || !gaa_set.is_subset(universe) {
            return Err(Error::Config(format!(
                "eligibility sets must lie within {total} channels"
            )));
        }
        Ok(ChannelPool {
            total,
            pal_set,
            gaa_set,
        })
    }

    /// Seven channels, CH1..CH3 for PALs and CH4..CH7 for GAAs.
    pub fn fig2_default() -> Self {
        let pal = (0..3).map(ChannelId).collect();
        let gaa = (3..7).map(ChannelId).collect();
        ChannelPool::new(7, pal, gaa).expect("static layout is valid")
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn universe(&self) -> ChannelSet {
        ChannelSet::full(self.total)
    }

    pub fn pal_set(&self) -> ChannelSet {
        self.pal_set
    }

    pub fn gaa_set(&self) -> ChannelSet {
        self.gaa_set
    }

    pub fn eligible(&self, tier: Tier) -> ChannelSet {
        match tier {
            Tier::Pal => self.pal_set,
            Tier::Gaa => self.gaa_set,
        }
    }

    pub fn check(&self, s: ChannelId) -> Result<()> {
        if s.0 < self.total {
            Ok(())
        } else {
            Err(Error::InvalidChannel {
                channel: s.0,
                total: self.total,
            })
        }
    }

    pub fn check_set(&self, set: ChannelSet) -> Result<()> {
        match set.difference(self.universe()).iter().next() {
            None => Ok(()),
            Some(s) => Err(Error::InvalidChannel {
                channel: s.0,
                total: self.total,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Per-slot channel demand `d_k(t)`, as a step function of the slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemandSchedule {
    Constant(u32),
    /// `(slot, demand)` change points in ascending slot order; zero before the first.
    Steps(Vec<(u32, u32)>),
}

impl DemandSchedule {
    pub fn at(&self, t: u32) -> u32 {
        match self {
            DemandSchedule::Constant(d) => *d,
            DemandSchedule::Steps(steps) => steps
                .iter()
                .take_while(|(slot, _)| *slot <= t)
                .last()
                .map_or(0, |(_, d)| *d),
        }
    }

    /// Slots strictly inside `(from, until)` where the demand may change.
    pub fn change_points(&self, from: u32, until: Option<u32>) -> Vec<u32> {
        match self {
            DemandSchedule::Constant(_) => Vec::new(),
            DemandSchedule::Steps(steps) => steps
                .iter()
                .map(|(slot, _)| *slot)
                .filter(|slot| *slot > from && until.is_none_or(|u| *slot < u))
                .collect(),
        }
    }
}

/// One PAL or GAA device.
#[derive(Debug, Clone, PartialEq)]
pub struct Cbsd {
    pub id: CbsdId,
    pub tier: Tier,
    pub position: Option<Position>,
    pub demand: DemandSchedule,
    pub arrival: u32,
    /// Exclusive end of the active interval; `None` stays until the horizon.
    pub departure: Option<u32>,
}

impl Cbsd {
    pub fn new(id: u32, tier: Tier, demand: u32) -> Self {
        Cbsd {
            id: CbsdId(id),
            tier,
            position: None,
            demand: DemandSchedule::Constant(demand),
            arrival: 0,
            departure: None,
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.position = Some(Position { x, y });
        self
    }

    pub fn active_during(mut self, arrival: u32, departure: Option<u32>) -> Self {
        self.arrival = arrival;
        self.departure = departure;
        self
    }

    pub fn is_active(&self, t: u32) -> bool {
        t >= self.arrival && self.departure.is_none_or(|d| t < d)
    }

    /// `d_k(t)`, zero outside the active interval.
    pub fn demand_at(&self, t: u32) -> u32 {
        if self.is_active(t) {
            self.demand.at(t)
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Row {
    tier: Tier,
    channels: ChannelSet,
}

/// Occupants of one channel, in assignment order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelOccupancy {
    pub pals: Vec<CbsdId>,
    pub gaas: Vec<CbsdId>,
}

/// The binary assignment matrix `b_k^s(t)` for one slot.
///
/// Every member CBSD has a row, possibly empty. A per-channel occupancy index
/// and the GAA assignment order are maintained alongside the rows.
#[derive(Debug, Clone)]
pub struct AllocationState {
    slot: u32,
    total: usize,
    rows: BTreeMap<CbsdId, Row>,
    occupancy: Vec<ChannelOccupancy>,
    gaa_order: Vec<(CbsdId, ChannelId)>,
}

impl PartialEq for AllocationState {
    fn eq(&self, other: &Self) -> bool {
        self.slot == other.slot
            && self.total == other.total
            && self.rows == other.rows
            && self.gaa_order == other.gaa_order
    }
}

impl AllocationState {
    pub fn new(slot: u32, total: usize) -> Self {
        AllocationState {
            slot,
            total,
            rows: BTreeMap::new(),
            occupancy: vec![ChannelOccupancy::default(); total],
            gaa_order: Vec::new(),
        }
    }

    /// A state with an empty row for every listed member.
    pub fn with_members<I>(slot: u32, total: usize, members: I) -> Self
    where
        I: IntoIterator<Item = (CbsdId, Tier)>,
    {
        let mut state = AllocationState::new(slot, total);
        for (k, tier) in members {
            state.add_member(k, tier);
        }
        state
    }

    pub fn add_member(&mut self, k: CbsdId, tier: Tier) {
        self.rows.entry(k).or_insert(Row {
            tier,
            channels: ChannelSet::empty(),
        });
    }

    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn total_channels(&self) -> usize {
        self.total
    }

    fn check_channel(&self, s: ChannelId) -> Result<()> {
        if s.0 < self.total {
            Ok(())
        } else {
            Err(Error::InvalidChannel {
                channel: s.0,
                total: self.total,
            })
        }
    }

    fn row(&self, k: CbsdId) -> Result<&Row> {
        self.rows.get(&k).ok_or(Error::UnknownCbsd(k))
    }

    /// Sets `b_k^s = 1`. Assigning an already-held channel is a no-op.
    pub fn assign(&mut self, k: CbsdId, s: ChannelId) -> Result<()> {
        self.check_channel(s)?;
        let row = self.rows.get_mut(&k).ok_or(Error::UnknownCbsd(k))?;
        if row.channels.contains(s) {
            return Ok(());
        }
        row.channels.insert(s);
        let occ = &mut self.occupancy[s.0];
        match row.tier {
            Tier::Pal => occ.pals.push(k),
            Tier::Gaa => {
                occ.gaas.push(k);
                self.gaa_order.push((k, s));
            }
        }
        Ok(())
    }

    /// Sets `b_k^s = 0`.
    pub fn unassign(&mut self, k: CbsdId, s: ChannelId) -> Result<()> {
        self.check_channel(s)?;
        let row = self.rows.get_mut(&k).ok_or(Error::UnknownCbsd(k))?;
        if !row.channels.contains(s) {
            return Ok(());
        }
        row.channels.remove(s);
        let occ = &mut self.occupancy[s.0];
        match row.tier {
            Tier::Pal => occ.pals.retain(|&p| p != k),
            Tier::Gaa => {
                occ.gaas.retain(|&g| g != k);
                self.gaa_order.retain(|&pair| pair != (k, s));
            }
        }
        Ok(())
    }

    /// True iff some PAL holds `s`.
    pub fn occupied_by_pal(&self, s: ChannelId) -> Result<bool> {
        self.check_channel(s)?;
        Ok(!self.occupancy[s.0].pals.is_empty())
    }

    /// Number of channels assigned to `k` (the row sum).
    pub fn allocated_count(&self, k: CbsdId) -> Result<u32> {
        Ok(self.row(k)?.channels.len() as u32)
    }

    pub fn channels_of(&self, k: CbsdId) -> Result<ChannelSet> {
        Ok(self.row(k)?.channels)
    }

    pub fn tier_of(&self, k: CbsdId) -> Result<Tier> {
        Ok(self.row(k)?.tier)
    }

    pub fn contains(&self, k: CbsdId) -> bool {
        self.rows.contains_key(&k)
    }

    pub fn holds(&self, k: CbsdId, s: ChannelId) -> bool {
        self.rows.get(&k).is_some_and(|r| r.channels.contains(s))
    }

    pub fn occupancy(&self, s: ChannelId) -> &ChannelOccupancy {
        &self.occupancy[s.0]
    }

    /// GAAs on `s`, in the order they were assigned.
    pub fn gaas_on(&self, s: ChannelId) -> &[CbsdId] {
        &self.occupancy[s.0].gaas
    }

    pub fn pals_on(&self, s: ChannelId) -> &[CbsdId] {
        &self.occupancy[s.0].pals
    }

    /// `(cbsd, channel)` GAA assignments in the order they were made.
    pub fn gaa_order(&self) -> &[(CbsdId, ChannelId)] {
        &self.gaa_order
    }

    /// Member rows in ascending id order.
    pub fn rows(&self) -> impl Iterator<Item = (CbsdId, Tier, ChannelSet)> + '_ {
        self.rows.iter().map(|(k, r)| (*k, r.tier, r.channels))
    }

    /// `(cbsd, channel)` pairs in ascending (cbsd, channel) order.
    pub fn assignments(&self) -> impl Iterator<Item = (CbsdId, ChannelId)> + '_ {
        self.rows
            .iter()
            .flat_map(|(k, r)| r.channels.iter().map(move |s| (*k, s)))
    }

    pub fn is_empty(&self) -> bool {
        self.rows.values().all(|r| r.channels.is_empty())
    }

    /// Same members and the same assignment matrix, ignoring slot and order.
    pub fn same_assignment(&self, other: &AllocationState) -> bool {
        self.rows == other.rows
    }
}

/// `max(0, d_k(t) - allocated_count(state, k))`.
pub fn unmet_demand(state: &AllocationState, k: CbsdId, demand: u32) -> Result<u32> {
    Ok(demand.saturating_sub(state.allocated_count(k)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(n: usize) -> ChannelId {
        ChannelId::from_number(n).unwrap()
    }

    fn fig2_slot_t() -> AllocationState {
        let mut state = AllocationState::with_members(
            1,
            7,
            [
                (CbsdId(1), Tier::Pal),
                (CbsdId(101), Tier::Gaa),
                (CbsdId(102), Tier::Gaa),
                (CbsdId(103), Tier::Gaa),
            ],
        );
        state.assign(CbsdId(1), ch(2)).unwrap();
        state.assign(CbsdId(102), ch(5)).unwrap();
        state
    }

    #[test]
    fn occupied_by_pal_counts_only_pals() {
        let state = fig2_slot_t();
        assert!(state.occupied_by_pal(ch(2)).unwrap());
        assert!(!state.occupied_by_pal(ch(5)).unwrap());
        let empty = AllocationState::new(0, 7);
        assert!((0..7).all(|s| !empty.occupied_by_pal(ChannelId(s)).unwrap()));
    }

    #[test]
    fn occupied_by_pal_rejects_out_of_range() {
        let state = fig2_slot_t();
        assert!(matches!(
            state.occupied_by_pal(ChannelId(7)),
            Err(Error::InvalidChannel { channel: 7, total: 7 })
        ));
    }

    #[test]
    fn allocated_count_is_row_sum() {
        let mut state = fig2_slot_t();
        assert_eq!(state.allocated_count(CbsdId(102)).unwrap(), 1);
        assert_eq!(state.allocated_count(CbsdId(101)).unwrap(), 0);
        state.assign(CbsdId(101), ch(6)).unwrap();
        state.assign(CbsdId(101), ch(7)).unwrap();
        assert_eq!(state.allocated_count(CbsdId(101)).unwrap(), 2);
        assert!(matches!(
            state.allocated_count(CbsdId(9)),
            Err(Error::UnknownCbsd(CbsdId(9)))
        ));
    }

    #[test]
    fn unmet_demand_saturates() {
        let mut state = AllocationState::with_members(0, 4, [(CbsdId(1), Tier::Gaa)]);
        assert_eq!(unmet_demand(&state, CbsdId(1), 1).unwrap(), 1);
        state.assign(CbsdId(1), ChannelId(0)).unwrap();
        assert_eq!(unmet_demand(&state, CbsdId(1), 1).unwrap(), 0);
        assert_eq!(unmet_demand(&state, CbsdId(1), 3).unwrap(), 2);
        assert_eq!(unmet_demand(&state, CbsdId(1), 0).unwrap(), 0);
    }

    #[test]
    fn unassign_keeps_index_consistent() {
        let mut state = fig2_slot_t();
        state.assign(CbsdId(103), ch(5)).unwrap();
        assert_eq!(state.gaas_on(ch(5)), &[CbsdId(102), CbsdId(103)]);
        state.unassign(CbsdId(102), ch(5)).unwrap();
        assert_eq!(state.gaas_on(ch(5)), &[CbsdId(103)]);
        assert_eq!(state.gaa_order(), &[(CbsdId(103), ch(5))]);
    }

    #[test]
    fn channel_set_iterates_ascending() {
        let set: ChannelSet = [ch(6), ch(2), ch(5)].into_iter().collect();
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![ch(2), ch(5), ch(6)]);
        assert_eq!(set.to_string(), "{CH2,CH5,CH6}");
        assert_eq!(ChannelSet::full(64).len(), 64);
    }

    #[test]
    fn pool_rejects_out_of_range_sets() {
        let bad: ChannelSet = [ChannelId(7)].into_iter().collect();
        assert!(ChannelPool::new(7, bad, ChannelSet::empty()).is_err());
        assert!(ChannelPool::new(0, ChannelSet::empty(), ChannelSet::empty()).is_err());
        let pool = ChannelPool::fig2_default();
        assert_eq!(pool.pal_set().to_string(), "{CH1,CH2,CH3}");
        assert_eq!(pool.gaa_set().to_string(), "{CH4,CH5,CH6,CH7}");
    }

    #[test]
    fn demand_schedule_steps() {
        let sched = DemandSchedule::Steps(vec![(2, 1), (5, 3)]);
        assert_eq!(sched.at(0), 0);
        assert_eq!(sched.at(2), 1);
        assert_eq!(sched.at(4), 1);
        assert_eq!(sched.at(9), 3);
        let cbsd = Cbsd {
            demand: sched,
            ..Cbsd::new(1, Tier::Gaa, 0).active_during(3, Some(6))
        };
        assert_eq!(cbsd.demand_at(2), 0);
        assert_eq!(cbsd.demand_at(5), 3);
        assert_eq!(cbsd.demand_at(6), 0);
    }
}

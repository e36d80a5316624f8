use std::cmp::Ordering;

use crate::allocator::SlotEnvironment;
use crate::error::{Error, Result};
use crate::model::{Cbsd, CbsdId, ChannelSet};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    AvailabilitySet(ChannelSet),
    Departure(CbsdId),
    Arrival(Cbsd),
    DemandSet { cbsd: CbsdId, demand: u32 },
}

impl EventKind {
    /// Processing rank within a slot: grants, departures, arrivals, demand.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::AvailabilitySet(_) => 0,
            EventKind::Departure(_) => 1,
            EventKind::Arrival(_) => 2,
            EventKind::DemandSet { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub slot: u32,
    pub kind: EventKind,
}

impl Event {
    pub fn new(slot: u32, kind: EventKind) -> Self {
        Event { slot, kind }
    }
}

/// Stable sort into processing order: (slot, kind rank), then input order.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| match a.slot.cmp(&b.slot) {
        Ordering::Equal => a.kind.rank().cmp(&b.kind.rank()),
        other => other,
    });
}

/// Applies one slot's events to `env` in place. Every event must target `env.t`.
pub fn apply_in_place(env: &mut SlotEnvironment, events: &[Event]) -> Result<()> {
    let mut ordered = events.to_vec();
    sort_events(&mut ordered);
    for event in &ordered {
        if event.slot != env.t {
            return Err(Error::Event {
                slot: env.t,
                message: format!("event for slot {} applied at slot {}", event.slot, env.t),
            });
        }
        match &event.kind {
            EventKind::AvailabilitySet(set) => env.set_available(*set).map_err(|e| Error::Event {
                slot: env.t,
                message: format!("malformed channel set: {e}"),
            })?,
            EventKind::Departure(k) => env.deactivate(*k)?,
            EventKind::Arrival(cbsd) => env.activate(cbsd.id, cbsd.tier, cbsd.demand.at(env.t))?,
            EventKind::DemandSet { cbsd, demand } => env.set_demand(*cbsd, *demand)?,
        }
    }
    Ok(())
}

/// Advances `env` one slot and applies that slot's events.
pub fn apply_events(env: &SlotEnvironment, events: &[Event]) -> Result<SlotEnvironment> {
    let mut next = env.clone();
    next.t += 1;
    apply_in_place(&mut next, events)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::interference::{FeasibilityMode, InterferenceMatrix};
    use crate::model::{ChannelId, ChannelPool, Tier};

    fn chans(ns: &[usize]) -> ChannelSet {
        ns.iter().map(|&n| ChannelId::from_number(n).unwrap()).collect()
    }

    fn fig2_slot0() -> SlotEnvironment {
        SlotEnvironment::new(
            0,
            Arc::new(ChannelPool::fig2_default()),
            Arc::new(InterferenceMatrix::empty(1.0).unwrap()),
            FeasibilityMode::Literal,
        )
        .with_available(chans(&[2, 3, 5, 6]))
        .and_then(|e| e.with_cbsd(1, Tier::Pal, 1))
        .and_then(|e| e.with_cbsd(2, Tier::Pal, 1))
        .and_then(|e| e.with_cbsd(102, Tier::Gaa, 1))
        .unwrap()
    }

    #[test]
    fn fig2_transition() {
        let events = vec![
            Event::new(1, EventKind::Arrival(Cbsd::new(103, Tier::Gaa, 1))),
            Event::new(1, EventKind::Arrival(Cbsd::new(101, Tier::Gaa, 1))),
            Event::new(1, EventKind::Departure(CbsdId(2))),
            Event::new(1, EventKind::AvailabilitySet(chans(&[1, 2, 5, 6]))),
        ];
        let env = apply_events(&fig2_slot0(), &events).unwrap();
        assert_eq!(env.t, 1);
        assert_eq!(env.available, chans(&[1, 2, 5, 6]));
        assert_eq!(env.active_of(Tier::Pal), vec![CbsdId(1)]);
        assert_eq!(
            env.active_of(Tier::Gaa),
            vec![CbsdId(101), CbsdId(102), CbsdId(103)]
        );
    }

    #[test]
    fn empty_events_only_advance() {
        let before = fig2_slot0();
        let after = apply_events(&before, &[]).unwrap();
        assert_eq!(after.t, 1);
        let mut rewound = after.clone();
        rewound.t = 0;
        assert_eq!(rewound, before);
    }

    #[test]
    fn event_errors() {
        let env = fig2_slot0();
        let unknown = [Event::new(1, EventKind::Departure(CbsdId(9)))];
        assert!(matches!(apply_events(&env, &unknown), Err(Error::Event { slot: 1, .. })));
        let dup = [Event::new(1, EventKind::Arrival(Cbsd::new(1, Tier::Pal, 1)))];
        assert!(apply_events(&env, &dup).is_err());
        let demand = [Event::new(1, EventKind::DemandSet { cbsd: CbsdId(9), demand: 1 })];
        assert!(apply_events(&env, &demand).is_err());
        let bad_set = [Event::new(1, EventKind::AvailabilitySet(ChannelSet::from_bits(1 << 9)))];
        assert!(apply_events(&env, &bad_set).is_err());
        let wrong_slot = [Event::new(5, EventKind::Departure(CbsdId(1)))];
        assert!(apply_events(&env, &wrong_slot).is_err());
    }

    #[test]
    fn departure_then_arrival_in_one_slot() {
        // a departure is processed before an arrival of the same id
        let events = [
            Event::new(1, EventKind::Arrival(Cbsd::new(2, Tier::Pal, 3))),
            Event::new(1, EventKind::Departure(CbsdId(2))),
        ];
        let env = apply_events(&fig2_slot0(), &events).unwrap();
        assert_eq!(env.demand(CbsdId(2)), 3);
    }
}

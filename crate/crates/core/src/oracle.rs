//! Independent constraint checker, exhaustive small-instance oracle and
//! comparison baselines.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocator::{Allocator, SlotEnvironment};
use crate::error::{Error, Result};
use crate::interference::{feasible_for_gaa, FeasibilityMode, InterferenceMatrix};
use crate::model::{AllocationState, CbsdId, ChannelId, ChannelSet, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    PalCollision,
    GaaOnPalChannel,
    UnavailableChannel,
    IneligibleChannel,
    InterferenceExceeded,
    DemandExceeded,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::PalCollision => "PAL_COLLISION",
            ViolationKind::GaaOnPalChannel => "GAA_ON_PAL_CHANNEL",
            ViolationKind::UnavailableChannel => "UNAVAILABLE_CHANNEL",
            ViolationKind::IneligibleChannel => "INELIGIBLE_CHANNEL",
            ViolationKind::InterferenceExceeded => "INTERFERENCE_EXCEEDED",
            ViolationKind::DemandExceeded => "DEMAND_EXCEEDED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub kind: ViolationKind,
    pub slot: u32,
    pub subject: CbsdId,
    pub channel: ChannelId,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at slot {}: CBSD {} on {}",
            self.kind.as_str(),
            self.slot,
            self.subject,
            self.channel
        )
    }
}

/// Sum of `r[k][j]` over `others`, skipping `k`, in the given order.
fn received(r: &InterferenceMatrix, k: CbsdId, others: &[CbsdId]) -> Result<f64> {
    others
        .iter()
        .filter(|&&j| j != k)
        .try_fold(0.0, |acc, &j| Ok(acc + r.get(k, j)?))
}

/// Checks `state` against every allocation constraint, using `env.mode`.
pub fn validate_allocation(env: &SlotEnvironment, state: &AllocationState) -> Result<Vec<Violation>> {
    validate_with_mode(env, state, env.mode)
}

/// As [`validate_allocation`] with an explicit interference mode.
///
/// `Literal` replays the GAA assignment order recorded in `state`: each GAA
/// must have received at most `gamma` from the co-channel GAAs assigned
/// before it. `Mutual` checks every GAA against its full co-channel set.
pub fn validate_with_mode(
    env: &SlotEnvironment,
    state: &AllocationState,
    mode: FeasibilityMode,
) -> Result<Vec<Violation>> {
    if state.slot() != env.t {
        return Err(Error::SlotMismatch {
            expected: env.t,
            found: state.slot(),
        });
    }
    if state.total_channels() != env.pool.total() {
        return Err(Error::Config(format!(
            "state spans {} channels, pool has {}",
            state.total_channels(),
            env.pool.total()
        )));
    }
    let slot = env.t;
    let mut out = Vec::new();
    let mut push = |kind, subject, channel| {
        out.push(Violation {
            kind,
            slot,
            subject,
            channel,
        })
    };

    for (k, tier, set) in state.rows() {
        for s in set.iter() {
            if !env.available.contains(s) {
                push(ViolationKind::UnavailableChannel, k, s);
            }
            if !env.pool.eligible(tier).contains(s) {
                push(ViolationKind::IneligibleChannel, k, s);
            }
        }
        if set.len() as u32 > env.demand(k) {
            let last = set.iter().last().expect("non-empty row");
            push(ViolationKind::DemandExceeded, k, last);
        }
    }

    for idx in 0..state.total_channels() {
        let s = ChannelId(idx);
        let occ = state.occupancy(s);
        for &extra in occ.pals.iter().skip(1) {
            push(ViolationKind::PalCollision, extra, s);
        }
        if !occ.pals.is_empty() {
            for &g in &occ.gaas {
                push(ViolationKind::GaaOnPalChannel, g, s);
            }
        }
        if mode == FeasibilityMode::Mutual {
            for &g in &occ.gaas {
                if received(&env.r, g, &occ.gaas)? > env.r.gamma() {
                    push(ViolationKind::InterferenceExceeded, g, s);
                }
            }
        }
    }

    if mode == FeasibilityMode::Literal {
        let mut admitted: Vec<Vec<CbsdId>> = vec![Vec::new(); state.total_channels()];
        for &(k, s) in state.gaa_order() {
            if received(&env.r, k, &admitted[s.0])? > env.r.gamma() {
                push(ViolationKind::InterferenceExceeded, k, s);
            }
            admitted[s.0].push(k);
        }
    }

    out.sort();
    Ok(out)
}

/// Per-tier count of CBSDs that lost a channel they still had demand for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveCount {
    pub pal: u32,
    pub gaa: u32,
}

impl MoveCount {
    pub fn total(&self) -> u32 {
        self.pal + self.gaa
    }
}

/// Whether `k` moved between `prev` and `next`.
///
/// A CBSD active in both slots moves when it keeps fewer of its previous
/// channels than `min(|previous|, d_k(t))`. Arrivals and departures are not
/// moves, and neither is releasing a channel after a demand drop.
pub fn is_move(prev: ChannelSet, next: ChannelSet, demand: u32) -> bool {
    let needed = prev.len().min(demand as usize);
    prev.intersection(next).len() < needed
}

pub fn count_moves(prev: &AllocationState, next: &AllocationState, env: &SlotEnvironment) -> MoveCount {
    let mut count = MoveCount::default();
    for (k, tier, set) in next.rows() {
        let Ok(before) = prev.channels_of(k) else {
            continue;
        };
        if is_move(before, set, env.demand(k)) {
            match tier {
                Tier::Pal => count.pal += 1,
                Tier::Gaa => count.gaa += 1,
            }
        }
    }
    count
}

/// Size limits for [`brute_force_min_moves`].
pub const ORACLE_MAX_CBSDS: usize = 6;
pub const ORACLE_MAX_CHANNELS: usize = 6;

struct Search<'a> {
    env: &'a SlotEnvironment,
    prev: &'a AllocationState,
    order: Vec<(CbsdId, Tier, u32, ChannelSet)>,
    /// Best possible additional service from position `i` on.
    tail_bound: Vec<u32>,
    state: AllocationState,
    best: Option<(u32, u32, Vec<u64>, AllocationState)>,
}

impl Search<'_> {
    fn moves_of(&self, k: CbsdId, set: ChannelSet, demand: u32) -> u32 {
        match self.prev.channels_of(k) {
            Ok(before) if is_move(before, set, demand) => 1,
            _ => 0,
        }
    }

    /// Row-major bit sequence of the matrix; larger means low channels first.
    fn matrix_key(&self) -> Vec<u64> {
        let total = self.state.total_channels();
        self.order
            .iter()
            .map(|(k, ..)| {
                let bits = self.state.channels_of(*k).expect("member").bits();
                bits.reverse_bits() >> (64 - total)
            })
            .collect()
    }

    fn place(&mut self, k: CbsdId, tier: Tier, set: ChannelSet) -> Result<bool> {
        let mut placed = Vec::new();
        let mut ok = true;
        for s in set.iter() {
            let occ = self.state.occupancy(s);
            let fits = match tier {
                Tier::Pal => occ.pals.is_empty() && occ.gaas.is_empty(),
                Tier::Gaa => {
                    occ.pals.is_empty()
                        && feasible_for_gaa(&self.state, k, s, &self.env.r, FeasibilityMode::Mutual)?
                }
            };
            if !fits {
                ok = false;
                break;
            }
            self.state.assign(k, s)?;
            placed.push(s);
        }
        if !ok {
            for s in placed.into_iter().rev() {
                self.state.unassign(k, s)?;
            }
        }
        Ok(ok)
    }

    fn visit(&mut self, i: usize, served: u32, moves: u32) -> Result<()> {
        if let Some((best_served, best_moves, ..)) = &self.best {
            let bound = served + self.tail_bound[i];
            if bound < *best_served || (bound == *best_served && moves > *best_moves) {
                return Ok(());
            }
        }
        if i == self.order.len() {
            let key = self.matrix_key();
            let better = match &self.best {
                None => true,
                Some((bs, bm, bk, _)) => (served, std::cmp::Reverse(moves), &key)
                    > (*bs, std::cmp::Reverse(*bm), bk),
            };
            if better {
                self.best = Some((served, moves, key, self.state.clone()));
            }
            return Ok(());
        }
        let (k, tier, demand, usable) = self.order[i];
        let subsets = subsets_up_to(usable, demand as usize);
        for set in subsets {
            if !self.place(k, tier, set)? {
                continue;
            }
            let m = self.moves_of(k, set, demand);
            self.visit(i + 1, served + set.len() as u32, moves + m)?;
            for s in set.iter() {
                self.state.unassign(k, s)?;
            }
        }
        Ok(())
    }
}

/// Every subset of `usable` with at most `limit` members.
fn subsets_up_to(usable: ChannelSet, limit: usize) -> Vec<ChannelSet> {
    let channels: Vec<ChannelId> = usable.iter().collect();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << channels.len()) {
        if mask.count_ones() as usize > limit {
            continue;
        }
        out.push(
            channels
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect(),
        );
    }
    out
}

/// Exhaustive search for a feasible slot-`t` allocation that serves the most
/// demand and, among those, moves the fewest CBSDs.
///
/// Feasibility is always checked in `Mutual` form, which does not depend on
/// assignment order. Ties prefer low channels: the row-major assignment
/// matrix (rows by ascending id, columns by ascending channel) read as a bit
/// string is the largest.
pub fn brute_force_min_moves(
    env: &SlotEnvironment,
    prev: &AllocationState,
) -> Result<(AllocationState, u32)> {
    env.check_prior(prev)?;
    let active: Vec<_> = env.active().collect();
    if active.len() > ORACLE_MAX_CBSDS || env.available.len() > ORACLE_MAX_CHANNELS {
        return Err(Error::Capacity(format!(
            "{} CBSDs and {} channels exceed the {}x{} limit",
            active.len(),
            env.available.len(),
            ORACLE_MAX_CBSDS,
            ORACLE_MAX_CHANNELS
        )));
    }
    let order: Vec<_> = active
        .iter()
        .map(|(k, c)| {
            let usable = env.available.intersection(env.pool.eligible(c.tier));
            (*k, c.tier, c.demand, usable)
        })
        .collect();
    let mut tail_bound = vec![0u32; order.len() + 1];
    for i in (0..order.len()).rev() {
        let (_, _, demand, usable) = order[i];
        tail_bound[i] = tail_bound[i + 1] + demand.min(usable.len() as u32);
    }
    let mut search = Search {
        env,
        prev,
        order,
        tail_bound,
        state: env.blank_state(),
        best: None,
    };
    search.visit(0, 0, 0)?;
    let (_, moves, _, state) = search.best.expect("the empty allocation is always feasible");
    Ok((state, moves))
}

/// Seeded random feasible fill: CBSDs in random order, each demand unit on a
/// uniformly drawn channel that passes every constraint.
pub fn random_allocator<R: Rng + ?Sized>(
    env: &SlotEnvironment,
    prev: &AllocationState,
    rng: &mut R,
) -> Result<AllocationState> {
    env.check_prior(prev)?;
    let mut state = env.blank_state();
    let mut units: Vec<CbsdId> = env
        .active()
        .flat_map(|(k, c)| std::iter::repeat_n(k, c.demand as usize))
        .collect();
    units.shuffle(rng);
    for k in units {
        let tier = env.tier(k).expect("active");
        let own = state.channels_of(k)?;
        let mut candidates: Vec<ChannelId> = env
            .available
            .intersection(env.pool.eligible(tier))
            .difference(own)
            .iter()
            .collect();
        candidates.shuffle(rng);
        for s in candidates {
            let occ = state.occupancy(s);
            let fits = match tier {
                Tier::Pal => occ.pals.is_empty() && occ.gaas.is_empty(),
                Tier::Gaa => {
                    occ.pals.is_empty() && feasible_for_gaa(&state, k, s, &env.r, env.mode)?
                }
            };
            if fits {
                state.assign(k, s)?;
                break;
            }
        }
    }
    Ok(state)
}

/// [`random_allocator`] with its own reproducible stream.
#[derive(Debug, Clone)]
pub struct RandomFill {
    rng: ChaCha8Rng,
}

impl RandomFill {
    pub fn new(seed: u64) -> Self {
        RandomFill {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Allocator for RandomFill {
    fn name(&self) -> &'static str {
        "random"
    }

    fn step(&mut self, env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
        random_allocator(env, prev, &mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForce;

impl Allocator for BruteForce {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn step(&mut self, env: &SlotEnvironment, prev: &AllocationState) -> Result<AllocationState> {
        brute_force_min_moves(env, prev).map(|(state, _)| state)
    }
}

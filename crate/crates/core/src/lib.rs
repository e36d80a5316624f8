//! Tier-aware, continuity-maximizing channel allocation for private CBRS
//! networks run through a domain proxy.
//!
//! A domain proxy holds the channels the SAS grants it and hands them out to
//! its PAL and GAA devices slot by slot. The [`allocator`] keeps every device
//! on the channel it already uses whenever the grant, PAL priority and the GAA
//! interference threshold allow it, and otherwise re-places it on the most
//! suitable channel. [`oracle`] holds an independent constraint checker,
//! an exhaustive small-instance optimum and two baselines; [`sim`] drives the
//! slot loop over a [`scenario`] and derives metrics.

pub mod allocator;
pub mod error;
pub mod interference;
pub mod model;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod synth;

pub use allocator::{classify, msc, mtc_step, tbsa, Allocator, SlotEnvironment, TierInput};
pub use error::{Error, Result};
pub use interference::{FeasibilityMode, InterferenceMatrix, PropagationModel};
pub use model::{AllocationState, Cbsd, CbsdId, ChannelId, ChannelPool, ChannelSet, Tier};
pub use oracle::{brute_force_min_moves, validate_allocation, Violation, ViolationKind};

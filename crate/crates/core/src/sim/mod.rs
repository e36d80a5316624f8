//! Discrete-time simulation over a scenario.

pub mod engine;
pub mod event;
pub mod metrics;
pub mod report;

pub use engine::{run_simulation, run_with, AllocatorChoice, RunOptions, Scenario, SlotRecord, SlotTrace};
pub use event::{apply_events, Event, EventKind};
pub use metrics::{compute_metrics, jain_index, MetricsReport, SlotMetrics};

//! Training runs with grouped traces, progress alignment, and Δloss maps.

mod align;
mod config;
mod delta;
mod protocols;
mod run;
mod trace;

pub use align::{
    align_by_group_loss, align_by_progress, default_thresholds, first_crossing, group_crossing_step,
    group_settling_step, last_crossing, point_at, AlignedPair, ProgressPoint,
};
pub use config::{DatasetSpec, RunConfig};
pub use delta::{delta_loss_map, DeltaLossMap, GridSpec};
pub use protocols::{
    clean_first, memorization_onset, paired_runs, region_deltas, CleanFirst, PairedRuns, RegionDelta,
    DEFAULT_STEP_MULTIPLIER,
};
pub use run::{run_many, run_training, RunOutput, Snapshot};
pub use trace::{
    read_trace, sidecar_path, write_trace, Divergence, GroupedTrace, ProbeValues, TestMetrics, TraceRecord,
};

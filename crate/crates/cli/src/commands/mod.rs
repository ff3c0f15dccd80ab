pub mod compare;
pub mod cscore;
pub mod examples;
pub mod noisy;
pub mod probe;
pub mod quadratic;
pub mod toy2d;

use std::path::Path;

use lazylab::data::NoiseSpec;
use lazylab::harness::{run_many, write_trace, DatasetSpec, GroupedTrace, RunConfig, RunOutput};

use crate::config::{ModelSection, TrainSection, YinYangSection};
use crate::CliError;

/// One yin-yang run; the dataset, the initialization and the batch order all
/// derive from `seed`.
pub(crate) fn yin_yang_run(
    seed: u64,
    data: &YinYangSection,
    noise: Option<NoiseSpec>,
    model: &ModelSection,
    train: &TrainSection,
    alpha: f64,
) -> RunConfig {
    RunConfig {
        dataset: DatasetSpec::YinYang {
            n: data.n,
            seed,
            margin: data.margin,
            noise,
        },
        test_set: None,
        model: model.build(2, 1, seed),
        train: train.build(seed),
        alpha,
        probe_every: 1,
        probe_count: 64,
        group_metric_every: 1,
        snapshot_losses: Vec::new(),
        output: None,
    }
}

/// Runs every config on the pool; any failure aborts with the run's index.
pub(crate) fn run_all(cfgs: &[RunConfig], jobs: usize) -> Result<Vec<RunOutput>, CliError> {
    for (i, c) in cfgs.iter().enumerate() {
        c.validate().map_err(|e| CliError::Config(format!("run {i}: {e}")))?;
    }
    run_many(cfgs, jobs)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::from(e).context(&format!("run {i}"))))
        .collect()
}

/// Writes the trace and reports a divergence as a numeric failure after the
/// partial trace is on disk.
pub(crate) fn save_trace(trace: &GroupedTrace, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        crate::create_dir(parent)?;
    }
    write_trace(trace, path)?;
    Ok(())
}

pub(crate) fn check_diverged(trace: &GroupedTrace, what: &str) -> Result<(), CliError> {
    match &trace.diverged {
        Some(d) => Err(CliError::Numeric(format!(
            "{what} diverged at step {} (loss {})",
            d.step,
            d.loss.map(|l| l.to_string()).unwrap_or_else(|| "non-finite".into())
        ))),
        None => Ok(()),
    }
}

/// Consecutive seeds starting at `base`.
pub(crate) fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

/// File-name friendly rendering of a threshold or α (`0.15` → `0.15`, `100` → `100`).
pub(crate) fn tag(v: f64) -> String {
    format!("{v}")
}

impl CliError {
    pub(crate) fn context(self, what: &str) -> CliError {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }
}

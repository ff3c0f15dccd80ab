//! Paired-regime experiment protocols built on [`run_training`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::LossKind;

use super::align::{align_by_group_loss, AlignedPair};
use super::config::RunConfig;
use super::delta::{delta_loss_map, DeltaLossMap, GridSpec};
use super::run::{run_many, RunOutput};
use super::trace::GroupedTrace;

/// Budget multiplier for the lazy run when none is given.
pub const DEFAULT_STEP_MULTIPLIER: usize = 5;

/// Two runs from the same initialization: `alpha = 1` and a lazy α.
#[derive(Debug, Clone)]
pub struct PairedRuns {
    pub nonlinear: RunOutput,
    pub lazy: RunOutput,
}

/// Runs `base` at α = 1 and at `lazy_alpha` with `step_multiplier` times
/// the steps, on up to `jobs` threads.
pub fn paired_runs(base: &RunConfig, lazy_alpha: f64, step_multiplier: usize, jobs: usize) -> Result<PairedRuns> {
    let cfgs = [base.with_alpha(1.0, 1), base.with_alpha(lazy_alpha, step_multiplier)];
    let mut out = run_many(&cfgs, jobs)?.into_iter();
    let nonlinear = out.next().expect("two runs")?;
    let lazy = out.next().expect("two runs")?;
    Ok(PairedRuns { nonlinear, lazy })
}

/// Mean Δloss over the easy region and the eye disks at one matched
/// mean-loss level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionDelta {
    pub threshold: f64,
    pub step_nonlinear: usize,
    pub step_lazy: usize,
    pub easy: f64,
    pub eye: f64,
}

/// Δloss maps between the snapshots of both runs, one per snapshot level
/// (`None` where either run never got there), with their region means.
pub fn region_deltas(
    pair: &PairedRuns,
    grid: &GridSpec,
    margin: f64,
    kind: LossKind,
) -> Result<Vec<Option<(RegionDelta, DeltaLossMap)>>> {
    pair.nonlinear
        .snapshots
        .iter()
        .zip(&pair.lazy.snapshots)
        .map(|(a, b)| {
            let (Some(a), Some(b)) = (a, b) else {
                return Ok(None);
            };
            let map = delta_loss_map(&a.model, &b.model, grid, kind)?;
            let easy = map
                .easy_mean(margin)
                .ok_or_else(|| Error::Config("grid has no point in the easy region".into()))?;
            let eye = map
                .eye_mean()
                .ok_or_else(|| Error::Config("grid has no point inside the eyes".into()))?;
            Ok(Some((
                RegionDelta {
                    threshold: a.threshold,
                    step_nonlinear: a.step,
                    step_lazy: b.step,
                    easy,
                    eye,
                },
                map,
            )))
        })
        .collect()
}

/// First record, after the noisy group's accuracy has bottomed out, at which
/// that accuracy exceeds `chance`.
pub fn memorization_onset(trace: &GroupedTrace, noisy: usize, chance: f64) -> Option<usize> {
    let acc: Vec<(usize, f64)> = trace
        .records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.group_acc.get(noisy).copied().flatten().map(|a| (i, a)))
        .collect();
    let lowest = acc.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?.0;
    acc[lowest..].iter().find(|(_, a)| *a > chance).map(|&(i, _)| i)
}

/// Both runs compared at the clean-loss level the nonlinear run had reached
/// when it started memorizing noisy labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleanFirst {
    pub onset_step: usize,
    pub pair: AlignedPair,
}

impl CleanFirst {
    /// `(nonlinear, lazy)` accuracy of `group` at the matched level.
    pub fn accuracies(&self, group: usize) -> Option<(f64, f64)> {
        let a = self.pair.a.as_ref()?.group_acc.get(group).copied().flatten()?;
        let b = self.pair.b.as_ref()?.group_acc.get(group).copied().flatten()?;
        Some((a, b))
    }
}

/// `None` when the nonlinear run never memorizes. The matched level is the
/// lowest clean loss the nonlinear run has seen up to the onset, so a
/// transient loss spike cannot move the crossing earlier.
pub fn clean_first(nonlinear: &GroupedTrace, lazy: &GroupedTrace, num_classes: usize) -> Result<Option<CleanFirst>> {
    let clean = nonlinear
        .group_index("clean")
        .ok_or_else(|| Error::Config("trace has no clean group".into()))?;
    let noisy = nonlinear
        .group_index("noisy")
        .ok_or_else(|| Error::Config("trace has no noisy group".into()))?;
    let Some(onset) = memorization_onset(nonlinear, noisy, 1.0 / num_classes as f64) else {
        return Ok(None);
    };
    let level = nonlinear.records[..=onset]
        .iter()
        .filter_map(|r| r.group_loss[clean])
        .fold(f64::INFINITY, f64::min);
    let pair = align_by_group_loss(nonlinear, lazy, "clean", &[level])?
        .pop()
        .expect("one threshold");
    Ok(Some(CleanFirst {
        onset_step: nonlinear.records[onset].step,
        pair,
    }))
}

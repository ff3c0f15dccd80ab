//! Matching two runs at equal training progress.

use serde::Serialize;

use crate::error::{Error, Result};

use super::trace::{GroupedTrace, ProbeValues, TestMetrics, TraceRecord};

/// A trace's state interpolated at a progress level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressPoint {
    /// Fractional step of the crossing.
    pub step: f64,
    pub mean_train_loss: f64,
    pub group_loss: Vec<Option<f64>>,
    pub group_acc: Vec<Option<f64>>,
    pub probe: Option<ProbeValues>,
    pub test: Option<TestMetrics>,
}

/// `None` on either side marks a threshold that trace never reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedPair {
    pub threshold: f64,
    pub a: Option<ProgressPoint>,
    pub b: Option<ProgressPoint>,
}

/// First index `k ≥ 1` with `values[k] ≤ threshold`, together with the
/// weight `w` such that `values[k−1] + w·(values[k] − values[k−1])` equals
/// the threshold. `None` when the first value is already at or below the
/// threshold, or it is never reached.
pub fn first_crossing(values: &[f64], threshold: f64) -> Option<(usize, f64)> {
    if values.first().is_none_or(|&v| v <= threshold) {
        return None;
    }
    let k = values.iter().position(|&v| v <= threshold)?;
    let (hi, lo) = (values[k - 1], values[k]);
    Some((k, (hi - threshold) / (hi - lo)))
}

/// Like [`first_crossing`], but for the crossing after which the values stay
/// at or below the threshold: `k` is the start of the final run of values
/// `≤ threshold`. `None` when the last value is above the threshold or the
/// first is not.
pub fn last_crossing(values: &[f64], threshold: f64) -> Option<(usize, f64)> {
    if values.first().is_none_or(|&v| v <= threshold) {
        return None;
    }
    let above = values.iter().rposition(|&v| v > threshold)?;
    let k = above + 1;
    if k == values.len() {
        return None;
    }
    let (hi, lo) = (values[k - 1], values[k]);
    Some((k, (hi - threshold) / (hi - lo)))
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + w * (b - a)
}

fn lerp_opt(a: Option<f64>, b: Option<f64>, w: f64) -> Option<f64> {
    Some(lerp(a?, b?, w))
}

fn interpolate(r0: &TraceRecord, r1: &TraceRecord, w: f64) -> ProgressPoint {
    let vec = |x: &[Option<f64>], y: &[Option<f64>]| x.iter().zip(y).map(|(&p, &q)| lerp_opt(p, q, w)).collect();
    ProgressPoint {
        step: lerp(r0.step as f64, r1.step as f64, w),
        mean_train_loss: lerp(r0.mean_train_loss, r1.mean_train_loss, w),
        group_loss: vec(&r0.group_loss, &r1.group_loss),
        group_acc: vec(&r0.group_acc, &r1.group_acc),
        probe: match (r0.probe, r1.probe) {
            (Some(p), Some(q)) => Some(ProbeValues {
                sign: lerp(p.sign, q.sign, w),
                ntk: lerp(p.ntk, q.ntk, w),
                repr: lerp(p.repr, q.repr, w),
            }),
            _ => None,
        },
        test: match (r0.test, r1.test) {
            (Some(p), Some(q)) => Some(TestMetrics {
                loss: lerp(p.loss, q.loss, w),
                acc: lerp(p.acc, q.acc, w),
            }),
            _ => None,
        },
    }
}

/// State of `trace` at the first point where `progress` falls to
/// `threshold`; records without a progress value are skipped.
pub fn point_at<F>(trace: &GroupedTrace, threshold: f64, progress: F) -> Option<ProgressPoint>
where
    F: Fn(&TraceRecord) -> Option<f64>,
{
    let (idx, values): (Vec<usize>, Vec<f64>) = trace
        .records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| progress(r).map(|v| (i, v)))
        .unzip();
    let (k, w) = first_crossing(&values, threshold)?;
    Some(interpolate(&trace.records[idx[k - 1]], &trace.records[idx[k]], w))
}

/// Interpolated step at which `group`'s loss first falls to `fraction` of
/// its value in the first record that has one.
pub fn group_crossing_step(trace: &GroupedTrace, group: usize, fraction: f64) -> Option<f64> {
    let initial = trace
        .records
        .iter()
        .find_map(|r| r.group_loss.get(group).copied().flatten())?;
    point_at(trace, fraction * initial, |r| {
        r.group_loss.get(group).copied().flatten()
    })
    .map(|p| p.step)
}

/// Interpolated step after which `group`'s loss stays at or below
/// `fraction` of its first recorded value.
pub fn group_settling_step(trace: &GroupedTrace, group: usize, fraction: f64) -> Option<f64> {
    let (steps, values): (Vec<f64>, Vec<f64>) = trace
        .records
        .iter()
        .filter_map(|r| r.group_loss.get(group).copied().flatten().map(|v| (r.step as f64, v)))
        .unzip();
    let (k, w) = last_crossing(&values, fraction * values.first()?)?;
    Some(lerp(steps[k - 1], steps[k], w))
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "thresholds must be finite and strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn align_with<F>(a: &GroupedTrace, b: &GroupedTrace, thresholds: &[f64], progress: F) -> Result<Vec<AlignedPair>>
where
    F: Fn(&TraceRecord) -> Option<f64> + Copy,
{
    check_thresholds(thresholds)?;
    Ok(thresholds
        .iter()
        .map(|&t| AlignedPair {
            threshold: t,
            a: point_at(a, t, progress),
            b: point_at(b, t, progress),
        })
        .collect())
}

/// Pairs the two traces at each mean-training-loss threshold.
pub fn align_by_progress(a: &GroupedTrace, b: &GroupedTrace, thresholds: &[f64]) -> Result<Vec<AlignedPair>> {
    align_with(a, b, thresholds, |r| Some(r.mean_train_loss))
}

/// Pairs the two traces at thresholds of one group's loss.
pub fn align_by_group_loss(
    a: &GroupedTrace,
    b: &GroupedTrace,
    group: &str,
    thresholds: &[f64],
) -> Result<Vec<AlignedPair>> {
    let ga = a
        .group_index(group)
        .ok_or_else(|| Error::Config(format!("no group {group:?} in first trace")))?;
    let gb = b
        .group_index(group)
        .ok_or_else(|| Error::Config(format!("no group {group:?} in second trace")))?;
    check_thresholds(thresholds)?;
    Ok(thresholds
        .iter()
        .map(|&t| AlignedPair {
            threshold: t,
            a: point_at(a, t, |r| r.group_loss[ga]),
            b: point_at(b, t, |r| r.group_loss[gb]),
        })
        .collect())
}

/// `count` log-spaced levels strictly between `initial` and `last`, decreasing.
pub fn default_thresholds(initial: f64, last: f64, count: usize) -> Result<Vec<f64>> {
    if !(initial.is_finite() && last.is_finite() && last > 0.0 && initial > last) {
        return Err(Error::Config(format!(
            "need initial > final > 0 for log-spaced thresholds, got {initial} and {last}"
        )));
    }
    let (hi, lo) = (initial.ln(), last.ln());
    Ok((1..=count)
        .map(|k| (hi + (lo - hi) * k as f64 / (count + 1) as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(losses: &[f64], metric: &[f64]) -> GroupedTrace {
        let mut t = GroupedTrace::new(vec!["g".into()]);
        for (i, (&l, &m)) in losses.iter().zip(metric).enumerate() {
            t.push(TraceRecord {
                step: i * 10,
                mean_train_loss: l,
                group_loss: vec![Some(l)],
                group_acc: vec![Some(m)],
                probe: None,
                test: None,
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn interpolates_between_straddling_records() {
        let t = trace(&[2.0, 1.0, 0.5], &[0.0, 1.0, 2.0]);
        let pairs = align_by_progress(&t, &t, &[1.5]).unwrap();
        let p = pairs[0].a.as_ref().unwrap();
        assert_eq!(p.group_acc[0], Some(0.5));
        assert_eq!(p.step, 5.0);
        assert_eq!(pairs[0].a, pairs[0].b);
    }

    #[test]
    fn unreachable_thresholds_are_missing() {
        let t = trace(&[2.0, 1.0, 0.5], &[0.0, 1.0, 2.0]);
        let pairs = align_by_progress(&t, &t, &[3.0, 0.75, 0.1]).unwrap();
        assert!(pairs[0].a.is_none());
        assert!(pairs[1].a.is_some());
        assert!(pairs[2].a.is_none());
    }

    #[test]
    fn first_crossing_only() {
        let t = trace(&[2.0, 0.9, 1.5, 0.5], &[0.0, 1.0, 2.0, 3.0]);
        let p = point_at(&t, 1.0, |r| Some(r.mean_train_loss)).unwrap();
        assert!((p.step - 10.0 / 1.1 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn group_crossing_is_relative_to_the_first_value() {
        let mut t = GroupedTrace::new(vec!["g".into()]);
        for (step, l) in [(0, 4.0), (10, 3.0), (20, 1.0)] {
            t.push(TraceRecord {
                step,
                mean_train_loss: l,
                group_loss: vec![Some(l)],
                group_acc: vec![None],
                probe: None,
                test: None,
            })
            .unwrap();
        }
        assert_eq!(group_crossing_step(&t, 0, 0.5), Some(15.0));
        assert_eq!(group_crossing_step(&t, 0, 0.1), None);
        assert_eq!(group_crossing_step(&t, 1, 0.5), None);
    }

    #[test]
    fn settling_ignores_transient_dips() {
        let v = [4.0, 1.0, 5.0, 3.0, 1.0, 0.5];
        assert_eq!(first_crossing(&v, 2.0), Some((1, 2.0 / 3.0)));
        assert_eq!(last_crossing(&v, 2.0), Some((4, 0.5)));
        assert_eq!(last_crossing(&[4.0, 1.0, 3.0], 2.0), None);
        assert_eq!(last_crossing(&[1.0, 0.5], 2.0), None);
    }

    #[test]
    fn group_settling_step_interpolates() {
        let mut t = GroupedTrace::new(vec!["g".into()]);
        for (step, l) in [(0, 4.0), (10, 1.0), (20, 5.0), (30, 3.0), (40, 1.0)] {
            t.push(TraceRecord {
                step,
                mean_train_loss: l,
                group_loss: vec![Some(l)],
                group_acc: vec![None],
                probe: None,
                test: None,
            })
            .unwrap();
        }
        assert!((group_crossing_step(&t, 0, 0.5).unwrap() - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(group_settling_step(&t, 0, 0.5), Some(35.0));
    }

    #[test]
    fn thresholds_must_decrease() {
        let t = trace(&[2.0, 1.0], &[0.0, 1.0]);
        assert!(align_by_progress(&t, &t, &[0.5, 1.5]).is_err());
    }

    #[test]
    fn default_ladder() {
        let th = default_thresholds(1.0, 1e-3, 8).unwrap();
        assert_eq!(th.len(), 8);
        assert!(th.windows(2).all(|w| w[1] < w[0]));
        assert!((th[2] - 1e-1).abs() < 1e-12);
        assert!(th[0] < 1.0 && th[7] > 1e-3);
    }
}

use serde::Serialize;

use crate::error::{Error, Result};

use super::dynamics::{mode_value, Regime};
use super::problem::QuadraticProblem;

/// Relative width at which bisection stops.
pub const BISECTION_RTOL: f64 = 1e-10;

fn check_mode(problem: &QuadraticProblem, mode: usize) -> Result<()> {
    if mode >= problem.d() {
        return Err(Error::Config(format!("mode {mode} out of range (d = {})", problem.d())));
    }
    Ok(())
}

fn check_target(problem: &QuadraticProblem, mode: usize, epsilon: f64) -> Result<()> {
    check_mode(problem, mode)?;
    let (t0, ts) = (problem.theta0()[mode], problem.theta_star()[mode]);
    if ts == 0.0 {
        return Err(Error::Config(format!("mode {mode} has θ* = 0")));
    }
    if !(epsilon > 0.0 && epsilon < (ts - t0).abs()) {
        return Err(Error::NoCrossing(format!(
            "ε = {epsilon} is not below the initial gap |θ* − θ⁰| = {:.6e} of mode {mode}",
            (ts - t0).abs()
        )));
    }
    Ok(())
}

/// First time at which `|θ_λ(t) − θ*_λ| = ε` on the closed-form solution,
/// by bisection.
pub fn convergence_time(problem: &QuadraticProblem, mode: usize, epsilon: f64, regime: Regime) -> Result<f64> {
    check_target(problem, mode, epsilon)?;
    let ts = problem.theta_star()[mode];
    let gap = |t: f64| (mode_value(problem, mode, t, regime) - ts).abs() - epsilon;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while gap(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoCrossing(format!(
                "mode {mode} never gets within ε = {epsilon}"
            )));
        }
    }
    while hi - lo > BISECTION_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Small-initialization asymptotics `(1/ỹ) log(θ*/(εθ⁰))` (nonlinear) and
/// `(1/(μθ⁰)) log(θ*/ε)` (linearized).
pub fn approx_convergence_time(problem: &QuadraticProblem, mode: usize, epsilon: f64, regime: Regime) -> Result<f64> {
    check_mode(problem, mode)?;
    let (t0, ts, mu) = (problem.theta0()[mode], problem.theta_star()[mode], problem.mu()[mode]);
    Ok(match regime {
        Regime::Nonlinear => (ts / (epsilon * t0)).ln() / problem.y_tilde()[mode],
        Regime::Linearized => (ts / epsilon).ln() / (mu * t0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequentialBranch {
    /// The other mode is stronger: it has converged by the time the
    /// reference mode does.
    Learned,
    /// The other mode is weaker: it is still near zero.
    NotStarted,
    /// Equal strengths; no limit is claimed.
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentializationRow {
    pub sigma: f64,
    /// `t_λ(ε)` of the reference mode.
    pub convergence_time: f64,
    /// `θ_λ′(t_λ)`.
    pub other_value: f64,
    /// Distance to the small-initialization limit, when one is claimed.
    pub distance_to_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentializationTable {
    pub mode: usize,
    pub other: usize,
    pub epsilon: f64,
    pub branch: SequentialBranch,
    pub limit: Option<f64>,
    pub rows: Vec<SequentializationRow>,
}

impl SequentializationTable {
    /// Distances to the limit decrease along the ladder. Once a distance is
    /// down to rounding of the limit it only has to stay there.
    pub fn is_monotone_approach(&self) -> bool {
        let (Some(limit), Some(d)) = (
            self.limit,
            self.rows
                .iter()
                .map(|r| r.distance_to_limit)
                .collect::<Option<Vec<f64>>>(),
        ) else {
            return false;
        };
        let floor = 16.0 * f64::EPSILON * limit.abs().max(self.epsilon);
        d.windows(2).all(|w| w[1] < w[0] || w[1] <= floor)
    }
}

/// For each σ in the ladder, scales the initialization to `σ θ⁰`, finds the
/// time at which `mode` is ε-converged, and records where `other` is then.
pub fn sequentialization_check(
    problem: &QuadraticProblem,
    mode: usize,
    other: usize,
    epsilon: f64,
    sigma_ladder: &[f64],
) -> Result<SequentializationTable> {
    check_mode(problem, other)?;
    if sigma_ladder.is_empty()
        || sigma_ladder.iter().any(|&s| !(s > 0.0))
        || sigma_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Config("sigma ladder must be positive and decreasing".into()));
    }
    let (yl, yo) = (problem.y_tilde()[mode], problem.y_tilde()[other]);
    let branch = if other == mode || yo == yl {
        SequentialBranch::Tie
    } else if yo > yl {
        SequentialBranch::Learned
    } else {
        SequentialBranch::NotStarted
    };
    if branch == SequentialBranch::Tie && other != mode {
        log::warn!("modes {mode} and {other} have equal ỹ; no sequential limit");
    }
    let limit = match branch {
        SequentialBranch::Learned => Some(problem.theta_star()[other]),
        SequentialBranch::NotStarted => Some(0.0),
        SequentialBranch::Tie => None,
    };
    let rows = sigma_ladder
        .iter()
        .map(|&sigma| {
            let scaled = problem.rescaled_init(sigma)?;
            let t = convergence_time(&scaled, mode, epsilon, Regime::Nonlinear)?;
            let value = mode_value(&scaled, other, t, Regime::Nonlinear);
            Ok(SequentializationRow {
                sigma,
                convergence_time: t,
                other_value: value,
                distance_to_limit: limit.map(|l| (value - l).abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SequentializationTable {
        mode,
        other,
        epsilon,
        branch,
        limit,
        rows,
    })
}

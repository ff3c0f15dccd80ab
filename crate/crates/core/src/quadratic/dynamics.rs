use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::problem::QuadraticProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Nonlinear,
    Linearized,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Nonlinear => "nonlinear",
            Regime::Linearized => "linearized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    ClosedForm,
    OdeModes,
    OdeParams,
}

impl TrajectorySource {
    pub fn name(self) -> &'static str {
        match self {
            TrajectorySource::ClosedForm => "closed_form",
            TrajectorySource::OdeModes => "ode_modes",
            TrajectorySource::OdeParams => "ode_params",
        }
    }
}

/// Mode coefficients `θ_λ(t)`, one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub times: Vec<f64>,
    pub theta: Matrix,
    pub regime: Regime,
    pub source: TrajectorySource,
    /// Set when some value was non-finite and replaced by its `t → ∞` limit.
    pub clamped: bool,
}

impl ModeTrajectory {
    pub fn at(&self, step: usize) -> &[f64] {
        self.theta.row(step)
    }

    /// Largest absolute entrywise difference; trajectories must share times.
    pub fn sup_distance(&self, other: &ModeTrajectory) -> Result<f64> {
        if self.times != other.times || self.theta.cols() != other.theta.cols() {
            return Err(Error::Shape("trajectories sampled on different grids".into()));
        }
        Ok(self
            .theta
            .as_slice()
            .iter()
            .zip(other.theta.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config("no sample times".into()));
    }
    if times.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::Config("sample times must be >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sample times must be increasing".into()));
    }
    Ok(())
}

/// Nonlinear solution of one mode. Returns the value and whether it had to
/// be clamped to its limit.
pub fn nonlinear_mode(theta0: f64, theta_star: f64, mu: f64, t: f64) -> (f64, bool) {
    let value = if theta_star != 0.0 {
        let y_tilde = mu * theta_star;
        let decay = (-2.0 * y_tilde * t).exp();
        theta0 * theta_star / (theta0 - decay * (theta0 - theta_star))
    } else {
        theta0 / (1.0 + 2.0 * mu * theta0 * t)
    };
    if value.is_finite() {
        (value, false)
    } else {
        (theta_star, true)
    }
}

/// Linearized solution of one mode with rate `c μ θ⁰`.
pub fn linear_mode(theta0: f64, theta_star: f64, mu: f64, c: f64, t: f64) -> (f64, bool) {
    let rt = -c * mu * theta0 * t;
    // exact at both ends: θ⁰ at t = 0, θ* as t → ∞
    let value = theta0 * rt.exp() - theta_star * rt.exp_m1();
    if value.is_finite() {
        (value, false)
    } else {
        (theta_star, true)
    }
}

fn tabulate(
    problem: &QuadraticProblem,
    times: &[f64],
    regime: Regime,
    mode: impl Fn(usize, f64) -> (f64, bool),
) -> Result<ModeTrajectory> {
    check_times(times)?;
    let d = problem.d();
    let mut theta = Matrix::zeros(times.len(), d);
    let mut clamped = false;
    for (i, &t) in times.iter().enumerate() {
        for k in 0..d {
            let (v, c) = mode(k, t);
            clamped |= c;
            theta.set(i, k, v);
        }
    }
    Ok(ModeTrajectory {
        times: times.to_vec(),
        theta,
        regime,
        source: TrajectorySource::ClosedForm,
        clamped,
    })
}

pub fn closed_form_nonlinear(problem: &QuadraticProblem, times: &[f64]) -> Result<ModeTrajectory> {
    let (t0, ts, mu) = (problem.theta0(), problem.theta_star(), problem.mu());
    tabulate(problem, times, Regime::Nonlinear, |k, t| {
        nonlinear_mode(t0[k], ts[k], mu[k], t)
    })
}

/// Linearized solution with the problem's rate factor `c` (default 2, the
/// rate of the frozen-kernel flow).
pub fn closed_form_linear(problem: &QuadraticProblem, times: &[f64]) -> Result<ModeTrajectory> {
    let (t0, ts, mu) = (problem.theta0(), problem.theta_star(), problem.mu());
    let c = problem.linear_rate_factor();
    tabulate(problem, times, Regime::Linearized, |k, t| {
        linear_mode(t0[k], ts[k], mu[k], c, t)
    })
}

pub fn closed_form(problem: &QuadraticProblem, times: &[f64], regime: Regime) -> Result<ModeTrajectory> {
    match regime {
        Regime::Nonlinear => closed_form_nonlinear(problem, times),
        Regime::Linearized => closed_form_linear(problem, times),
    }
}

/// Closed-form value of one mode at one time.
pub fn mode_value(problem: &QuadraticProblem, mode: usize, t: f64, regime: Regime) -> f64 {
    let (t0, ts, mu) = (problem.theta0()[mode], problem.theta_star()[mode], problem.mu()[mode]);
    match regime {
        Regime::Nonlinear => nonlinear_mode(t0, ts, mu, t).0,
        Regime::Linearized => linear_mode(t0, ts, mu, problem.linear_rate_factor(), t).0,
    }
}

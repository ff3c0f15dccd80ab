//! Cross-checks between the closed forms and the two numerical integrators.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_for;

use super::dynamics::{closed_form, Regime};
use super::ode::{max_rate, ode_modes, ode_params};
use super::problem::{build_problem, QuadraticProblem};
use super::timing::convergence_time;

/// `dt · rate` used by [`oracle_residuals`]; small enough that RK4's global
/// error sits far below the 1e−6 comparisons.
pub const ORACLE_STEP_RATE: f64 = 0.01;

/// Gaussian `X` (entries `N(0, 1/d)`), Gaussian `y`, and `w⁰` with
/// entries `√(2·init_scale)·U(0.5, 1.5)`.
pub fn random_problem(n: usize, d: usize, seed: u64, init_scale: f64) -> Result<QuadraticProblem> {
    if n == 0 || d == 0 {
        return Err(Error::Config("random problem needs n, d >= 1".into()));
    }
    if !(init_scale.is_finite() && init_scale > 0.0) {
        return Err(Error::Config(format!("init_scale must be > 0, got {init_scale}")));
    }
    let mut rng = rng_for(seed, 0x0ac1e);
    let s = (d as f64).sqrt();
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal) / s).collect();
    let x = Matrix::from_vec(n, d, data)?;
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let w0: Vec<f64> = (0..d)
        .map(|_| (2.0 * init_scale).sqrt() * rng.random_range(0.5..1.5))
        .collect();
    build_problem(&x, &y, &w0)
}

/// Relative size below which a label component counts as zero.
const NEGLIGIBLE_LABEL: f64 = 1e-9;

/// Time by which every mode that carries label mass has covered `fraction`
/// of its gap `|θ* − θ⁰|`. Modes whose label component is rounding noise are
/// skipped: their θ* is essentially zero and the nonlinear flow only decays
/// towards it algebraically.
pub fn convergence_horizon(problem: &QuadraticProblem, fraction: f64, regime: Regime) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let y_max = problem.y_mode()[..problem.rank()]
        .iter()
        .fold(0.0f64, |m, &y| m.max(y.abs()));
    let mut horizon: f64 = 0.0;
    for k in 0..problem.rank() {
        let gap = (problem.theta_star()[k] - problem.theta0()[k]).abs();
        if gap == 0.0 || problem.y_mode()[k].abs() <= NEGLIGIBLE_LABEL * y_max {
            continue;
        }
        horizon = horizon.max(convergence_time(problem, k, (1.0 - fraction) * gap, regime)?);
    }
    Ok(horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResiduals {
    pub horizon_nonlinear: f64,
    pub horizon_linearized: f64,
    /// Sup-norm distances over the time grid.
    pub closed_vs_modes: f64,
    pub closed_vs_params: f64,
    pub modes_vs_params: f64,
    pub linear_closed_vs_modes: f64,
    pub linear_closed_vs_params: f64,
}

impl OracleResiduals {
    pub fn max(&self) -> f64 {
        [
            self.closed_vs_modes,
            self.closed_vs_params,
            self.modes_vs_params,
            self.linear_closed_vs_modes,
            self.linear_closed_vs_params,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    (0..=points).map(|i| t_end * i as f64 / points as f64).collect()
}

/// Closed form vs. both integrators in both regimes, over `points + 1`
/// uniform times up to the 99% convergence horizon of each regime.
pub fn oracle_residuals(problem: &QuadraticProblem, points: usize) -> Result<OracleResiduals> {
    let mut out = [0.0; 5];
    let mut horizons = [0.0; 2];
    for (r, regime) in [Regime::Nonlinear, Regime::Linearized].into_iter().enumerate() {
        let horizon = convergence_horizon(problem, 0.99, regime)?;
        horizons[r] = horizon;
        let times = uniform_grid(horizon.max(f64::MIN_POSITIVE), points.max(1));
        let rate = max_rate(problem, regime);
        let dt = if rate > 0.0 {
            ORACLE_STEP_RATE / rate
        } else {
            horizon.max(1.0)
        };
        let closed = closed_form(problem, &times, regime)?;
        let modes = ode_modes(problem, &times, dt, regime)?;
        let params = ode_params(problem, &times, dt, regime)?;
        if r == 0 {
            out[0] = closed.sup_distance(&modes)?;
            out[1] = closed.sup_distance(&params)?;
            out[2] = modes.sup_distance(&params)?;
        } else {
            out[3] = closed.sup_distance(&modes)?;
            out[4] = closed.sup_distance(&params)?;
        }
    }
    Ok(OracleResiduals {
        horizon_nonlinear: horizons[0],
        horizon_linearized: horizons[1],
        closed_vs_modes: out[0],
        closed_vs_params: out[1],
        modes_vs_params: out[2],
        linear_closed_vs_modes: out[3],
        linear_closed_vs_params: out[4],
    })
}

//! The solvable quadratic model: `f(x) = θᵀx` with `θ = ½ Σ w_λ² v_λ`,
//! trained by gradient flow on `w`, against its lazy counterpart.
//!
//! Closed-form mode solutions live in [`closed_form_nonlinear`] and
//! [`closed_form_linear`]; [`ode_modes`] and [`ode_params`] integrate the
//! same flows numerically (in mode and in raw coordinates) and serve as
//! oracles for them.

mod dynamics;
mod ode;
mod oracles;
mod problem;
mod timing;
mod trace;

pub use dynamics::{
    closed_form, closed_form_linear, closed_form_nonlinear, linear_mode, mode_value, nonlinear_mode, ModeTrajectory,
    Regime, TrajectorySource,
};
pub use ode::{max_rate, ode_modes, ode_params, rk4_step, MAX_STEP_RATE};
pub use oracles::{convergence_horizon, oracle_residuals, random_problem, OracleResiduals, ORACLE_STEP_RATE};
pub use problem::{build_problem, theta_star, QuadraticProblem, TIE_TOLERANCE};
pub use timing::{
    approx_convergence_time, convergence_time, sequentialization_check, SequentialBranch, SequentializationRow,
    SequentializationTable, BISECTION_RTOL,
};
pub use trace::{example_trace, group_losses, log_time_grid, write_trajectory_csv, GroupCurves};

//! Fixed-step RK4 integration of the gradient flow, used as an independent
//! check on the closed-form mode solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::dynamics::{check_times, ModeTrajectory, Regime, TrajectorySource};
use super::problem::QuadraticProblem;

/// Largest allowed `dt · rate`.
pub const MAX_STEP_RATE: f64 = 0.5;

/// Classical fourth-order Runge–Kutta step of `ẏ = f(y)`.
pub fn rk4_step<F>(f: &F, y: &mut [f64], dt: f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Largest per-mode rate constant of the flow in `regime`.
pub fn max_rate(problem: &QuadraticProblem, regime: Regime) -> f64 {
    let (t0, ts, mu) = (problem.theta0(), problem.theta_star(), problem.mu());
    (0..problem.d())
        .map(|k| match regime {
            Regime::Nonlinear => 2.0 * mu[k] * t0[k].max(ts[k]),
            Regime::Linearized => 2.0 * mu[k] * t0[k],
        })
        .fold(0.0, f64::max)
}

fn check_step(problem: &QuadraticProblem, dt: f64, regime: Regime) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    let rate = max_rate(problem, regime);
    if dt * rate >= MAX_STEP_RATE {
        return Err(Error::StepSize(format!(
            "dt = {dt} with rate {rate:.4e} exceeds the stability bound dt·rate < {MAX_STEP_RATE}"
        )));
    }
    Ok(())
}

fn check_bounded(problem: &QuadraticProblem, modes: &[f64], t: f64) -> Result<()> {
    for (k, &v) in modes.iter().enumerate() {
        let bound = 10.0 * problem.theta0()[k].abs().max(problem.theta_star()[k].abs());
        if !v.is_finite() || v.abs() > bound {
            return Err(Error::StepSize(format!(
                "mode {k} left its bounded range at t = {t}: {v}"
            )));
        }
    }
    Ok(())
}

/// Integrates `state` from one requested time to the next with steps no
/// longer than `dt`, recording `observe(state)` at each requested time.
fn integrate<F, O>(
    problem: &QuadraticProblem,
    times: &[f64],
    dt: f64,
    mut state: Vec<f64>,
    rhs: F,
    observe: O,
) -> Result<Matrix>
where
    F: Fn(&[f64], &mut [f64]),
    O: Fn(&[f64]) -> Vec<f64>,
{
    let d = problem.d();
    let mut out = Matrix::zeros(times.len(), d);
    let mut t = 0.0;
    for (i, &target) in times.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rk4_step(&rhs, &mut state, h);
            }
        }
        t = target;
        let modes = observe(&state);
        check_bounded(problem, &modes, t)?;
        out.row_mut(i).copy_from_slice(&modes);
    }
    Ok(out)
}

/// Decoupled scalar flows `θ̇_λ = −2μ_λ θ_λ (θ_λ − θ*_λ)` (nonlinear) or
/// `θ̇_λ = −2μ_λ θ⁰_λ (θ_λ − θ*_λ)` (frozen kernel).
pub fn ode_modes(problem: &QuadraticProblem, times: &[f64], dt: f64, regime: Regime) -> Result<ModeTrajectory> {
    check_times(times)?;
    check_step(problem, dt, regime)?;
    let mu = problem.mu().to_vec();
    let ts = problem.theta_star().to_vec();
    let t0 = problem.theta0().to_vec();
    let rhs = move |th: &[f64], out: &mut [f64]| {
        for k in 0..th.len() {
            let gain = match regime {
                Regime::Nonlinear => th[k],
                Regime::Linearized => t0[k],
            };
            out[k] = -2.0 * mu[k] * gain * (th[k] - ts[k]);
        }
    };
    let theta = integrate(problem, times, dt, problem.theta0().to_vec(), rhs, |s| s.to_vec())?;
    Ok(ModeTrajectory {
        times: times.to_vec(),
        theta,
        regime,
        source: TrajectorySource::OdeModes,
        clamped: false,
    })
}

/// Gradient flow in the raw parameters, computed from the data `(X, y)`.
///
/// Nonlinear: `ẇ = −∇_w ½‖X θ(w) − y‖²` with `θ(w) = ½ Σ w_λ² v_λ`.
/// Linearized: `θ̇ = −Σ(0) ∇_θ ½‖Xθ − y‖²` in ambient coordinates with
/// `Σ(0) = V diag(w⁰²) Vᵀ`.
pub fn ode_params(problem: &QuadraticProblem, times: &[f64], dt: f64, regime: Regime) -> Result<ModeTrajectory> {
    check_times(times)?;
    check_step(problem, dt, regime)?;
    let x = problem.inputs().to_nalgebra();
    let y = DVector::from_column_slice(problem.labels());
    let theta = match regime {
        Regime::Nonlinear => {
            let a: DMatrix<f64> = &x * problem.right_vectors();
            let rhs = |w: &[f64], out: &mut [f64]| {
                let th = DVector::from_iterator(w.len(), w.iter().map(|v| 0.5 * v * v));
                let resid = &a * th - &y;
                let g = a.tr_mul(&resid);
                for k in 0..w.len() {
                    out[k] = -w[k] * g[k];
                }
            };
            let observe = |w: &[f64]| w.iter().map(|v| 0.5 * v * v).collect();
            integrate(problem, times, dt, problem.w0().to_vec(), rhs, observe)?
        }
        Regime::Linearized => {
            let v = problem.right_vectors();
            let w0sq = DMatrix::from_diagonal(&DVector::from_iterator(problem.d(), problem.w0().iter().map(|w| w * w)));
            let sigma0 = v * w0sq * v.transpose();
            let xtx = x.tr_mul(&x);
            let xty = x.tr_mul(&y);
            let rhs = |th: &[f64], out: &mut [f64]| {
                let th = DVector::from_column_slice(th);
                let g = &xtx * th - &xty;
                let dth = -(&sigma0 * g);
                out.copy_from_slice(dth.as_slice());
            };
            let observe = |th: &[f64]| problem.to_modes(th);
            integrate(problem, times, dt, problem.to_ambient(problem.theta0()), rhs, observe)?
        }
    };
    Ok(ModeTrajectory {
        times: times.to_vec(),
        theta,
        regime,
        source: TrajectorySource::OdeParams,
        clamped: false,
    })
}

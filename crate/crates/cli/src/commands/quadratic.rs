use serde::{Deserialize, Serialize};

use lazylab::quadratic::{
    approx_convergence_time, closed_form, convergence_horizon, convergence_time, log_time_grid, oracle_residuals,
    random_problem, sequentialization_check, write_trajectory_csv, QuadraticProblem, Regime, SequentialBranch,
};
use lazylab::rng::mix_seed;

use crate::{num, opt_num, write_file, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticConfig {
    pub seed: u64,
    /// Random problems (Gaussian inputs and labels).
    pub problems: usize,
    pub n: usize,
    pub d: usize,
    /// Scale of the initial θ⁰.
    pub init_scale: f64,
    /// Grid points for the oracle comparison.
    pub points: usize,
    /// Largest acceptable oracle residual.
    pub tolerance: f64,
    /// Initialization scale and target distance for the convergence table.
    pub sigma: f64,
    pub epsilon: f64,
    pub sigma_ladder: Vec<f64>,
    pub trajectory_points: usize,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        QuadraticConfig {
            seed: 1,
            problems: 10,
            n: 8,
            d: 6,
            init_scale: 0.05,
            points: 200,
            tolerance: 1e-6,
            sigma: 1e-6,
            epsilon: 1e-4,
            sigma_ladder: vec![1e-2, 1e-4, 1e-6],
            trajectory_points: 200,
        }
    }
}

fn branch_name(b: SequentialBranch) -> &'static str {
    match b {
        SequentialBranch::Learned => "learned",
        SequentialBranch::NotStarted => "not_started",
        SequentialBranch::Tie => "tie",
    }
}

fn oracle_table(ctx: &Context, cfg: &QuadraticConfig, problems: &[QuadraticProblem]) -> Result<f64, CliError> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    println!("problem  closed~modes  closed~params  modes~params  lin:closed~modes  lin:closed~params");
    for (k, p) in problems.iter().enumerate() {
        let r = oracle_residuals(p, cfg.points).map_err(|e| CliError::from(e).context(&format!("problem {k}")))?;
        println!(
            "{k:>7}  {:>12.3e}  {:>13.3e}  {:>12.3e}  {:>16.3e}  {:>17.3e}",
            r.closed_vs_modes,
            r.closed_vs_params,
            r.modes_vs_params,
            r.linear_closed_vs_modes,
            r.linear_closed_vs_params
        );
        worst = worst.max(r.max());
        rows.push(vec![
            k.to_string(),
            num(r.horizon_nonlinear),
            num(r.horizon_linearized),
            num(r.closed_vs_modes),
            num(r.closed_vs_params),
            num(r.modes_vs_params),
            num(r.linear_closed_vs_modes),
            num(r.linear_closed_vs_params),
            num(r.max()),
        ]);
    }
    println!("max residual {worst:.3e} (tolerance {:.1e})", cfg.tolerance);
    write_rows(
        &ctx.path("oracles.csv"),
        &[
            "problem",
            "horizon_nonlinear",
            "horizon_linearized",
            "closed_vs_modes",
            "closed_vs_params",
            "modes_vs_params",
            "linear_closed_vs_modes",
            "linear_closed_vs_params",
            "max",
        ],
        &rows,
    )?;
    Ok(worst)
}

fn trajectories(ctx: &Context, cfg: &QuadraticConfig, p: &QuadraticProblem) -> Result<(), CliError> {
    for regime in [Regime::Nonlinear, Regime::Linearized] {
        let horizon = convergence_horizon(p, 0.99, regime)?;
        let times = log_time_grid(horizon * 1e-4, horizon, cfg.trajectory_points);
        let traj = closed_form(p, &times, regime)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf)?;
        write_file(&ctx.path(format!("trajectory_{}.csv", regime.name())), &buf)?;
    }
    Ok(())
}

fn convergence_rows(k: usize, p: &QuadraticProblem, epsilon: f64) -> Vec<Vec<String>> {
    (0..p.rank())
        .filter_map(|m| {
            let time = |r| convergence_time(p, m, epsilon, r).ok();
            let (t_nl, t_lin) = (time(Regime::Nonlinear)?, time(Regime::Linearized)?);
            let approx = |r| approx_convergence_time(p, m, epsilon, r).ok();
            Some(vec![
                k.to_string(),
                m.to_string(),
                num(p.mu()[m]),
                num(p.theta0()[m]),
                num(p.theta_star()[m]),
                num(p.y_tilde()[m]),
                num(t_nl),
                num(t_lin),
                opt_num(approx(Regime::Nonlinear)),
                opt_num(approx(Regime::Linearized)),
            ])
        })
        .collect()
}

fn sequential_rows(k: usize, p: &QuadraticProblem, cfg: &QuadraticConfig) -> Result<Vec<Vec<String>>, CliError> {
    if p.rank() < 2 {
        return Ok(Vec::new());
    }
    let mut by_strength: Vec<usize> = (0..p.rank()).collect();
    by_strength.sort_by(|&a, &b| p.y_tilde()[b].total_cmp(&p.y_tilde()[a]));
    let (strong, weak) = (by_strength[0], by_strength[1]);
    let mut rows = Vec::new();
    for (mode, other) in [(weak, strong), (strong, weak)] {
        let table = sequentialization_check(p, mode, other, cfg.epsilon, &cfg.sigma_ladder)
            .map_err(|e| CliError::from(e).context(&format!("problem {k}, modes {mode}/{other}")))?;
        for r in &table.rows {
            rows.push(vec![
                k.to_string(),
                mode.to_string(),
                other.to_string(),
                branch_name(table.branch).to_string(),
                num(r.sigma),
                num(r.convergence_time),
                num(r.other_value),
                opt_num(r.distance_to_limit),
            ]);
        }
    }
    Ok(rows)
}

pub fn run(ctx: &Context, check_oracles: bool) -> Result<(), CliError> {
    let cfg: QuadraticConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    if cfg.problems == 0 {
        return Err(CliError::Config("problems must be >= 1".into()));
    }
    let problems = (0..cfg.problems)
        .map(|k| random_problem(cfg.n, cfg.d, mix_seed(cfg.seed, k as u64), cfg.init_scale))
        .collect::<Result<Vec<_>, _>>()?;
    let worst = oracle_table(ctx, &cfg, &problems)?;
    if worst >= cfg.tolerance {
        return Err(CliError::Numeric(format!(
            "oracle residual {worst:.3e} is not below {:.1e}",
            cfg.tolerance
        )));
    }
    if check_oracles {
        return Ok(());
    }

    trajectories(ctx, &cfg, &problems[0])?;
    let mut conv = Vec::new();
    let mut seq = Vec::new();
    for (k, p) in problems.iter().enumerate() {
        let small = p.rescaled_init(cfg.sigma)?;
        conv.extend(convergence_rows(k, &small, cfg.epsilon));
        seq.extend(sequential_rows(k, p, &cfg)?);
    }
    write_rows(
        &ctx.path("convergence.csv"),
        &[
            "problem",
            "mode",
            "mu",
            "theta0",
            "theta_star",
            "y_tilde",
            "t_nonlinear",
            "t_linearized",
            "approx_nonlinear",
            "approx_linearized",
        ],
        &conv,
    )?;
    write_rows(
        &ctx.path("sequentialization.csv"),
        &[
            "problem",
            "mode",
            "other",
            "branch",
            "sigma",
            "convergence_time",
            "other_value",
            "distance_to_limit",
        ],
        &seq,
    )
}

use serde::{Deserialize, Serialize};

use lazylab::data::{example1, example2, example3, Dataset};
use lazylab::harness::{group_crossing_step, group_settling_step, DatasetSpec, RunConfig};
use lazylab::nn::{Activation, LossKind};
use lazylab::quadratic::{
    build_problem, closed_form, convergence_horizon, group_losses, log_time_grid, GroupCurves, Regime,
};

use super::{check_diverged, run_all, save_trace, tag};
use crate::config::{ModelSection, TrainSection};
use crate::{write_file, CliError, Context, Which};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Section {
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2Section {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub feat_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example3Section {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub spur_scale: f64,
    pub feat_scale: f64,
}

impl Default for Example1Section {
    fn default() -> Self {
        Example1Section { mu: vec![4.0, 1.0] }
    }
}

impl Default for Example2Section {
    fn default() -> Self {
        Example2Section {
            n: 20,
            d: 21,
            q: 3,
            feat_scale: 1.0,
        }
    }
}

impl Default for Example3Section {
    fn default() -> Self {
        Example3Section {
            n: 20,
            d: 22,
            q: 2,
            spur_scale: 0.5,
            feat_scale: 1.0,
        }
    }
}

/// Dense two-layer network trained on the same data, at each α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSection {
    pub enabled: bool,
    pub alphas: Vec<f64>,
    /// Step budget of every α other than 1, relative to `train.steps`.
    pub step_multiplier: usize,
    pub record_every: usize,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for MlpSection {
    fn default() -> Self {
        MlpSection {
            enabled: true,
            alphas: vec![1.0, 100.0],
            step_multiplier: 1,
            record_every: 10,
            model: ModelSection {
                hidden: vec![100],
                activation: Activation::Relu,
                init_gain: 0.1,
                bias: false,
                ..ModelSection::default()
            },
            train: TrainSection {
                learning_rate: 0.05,
                momentum: 0.0,
                steps: 4000,
                loss: LossKind::Mse,
                ..TrainSection::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExamplesConfig {
    pub seed: u64,
    /// Initialization `w⁰ = √σ·(1, …, 1)` of the quadratic model.
    pub sigma: f64,
    /// Samples per closed-form curve.
    pub points: usize,
    pub example1: Example1Section,
    pub example2: Example2Section,
    pub example3: Example3Section,
    pub mlp: MlpSection,
}

impl Default for ExamplesConfig {
    fn default() -> Self {
        ExamplesConfig {
            seed: 1,
            sigma: 1e-4,
            points: 400,
            example1: Example1Section::default(),
            example2: Example2Section::default(),
            example3: Example3Section::default(),
            mlp: MlpSection::default(),
        }
    }
}

impl ExamplesConfig {
    fn spec(&self, which: usize) -> DatasetSpec {
        match which {
            1 => DatasetSpec::Example1 {
                mu: self.example1.mu.clone(),
            },
            2 => DatasetSpec::Example2 {
                n: self.example2.n,
                d: self.example2.d,
                q: self.example2.q,
                feat_scale: self.example2.feat_scale,
                seed: self.seed,
            },
            _ => DatasetSpec::Example3 {
                n: self.example3.n,
                d: self.example3.d,
                q: self.example3.q,
                spur_scale: self.example3.spur_scale,
                feat_scale: self.example3.feat_scale,
                seed: self.seed,
            },
        }
    }
}

fn build(cfg: &ExamplesConfig, which: usize) -> Result<Dataset, CliError> {
    let ds = match which {
        1 => example1(&cfg.example1.mu),
        2 => {
            let e = &cfg.example2;
            example2(e.n, e.d, e.q, e.feat_scale, cfg.seed)
        }
        _ => {
            let e = &cfg.example3;
            example3(e.n, e.d, e.q, e.spur_scale, e.feat_scale, cfg.seed)
        }
    };
    ds.map_err(|e| CliError::from(e).context(&format!("example{which}")))
}

fn write_curves(ctx: &Context, name: &str, curves: &GroupCurves) -> Result<(), CliError> {
    let mut buf = Vec::new();
    curves.write_csv(&mut buf)?;
    write_file(&ctx.path(name), &buf)
}

fn closed_form_curves(ctx: &Context, cfg: &ExamplesConfig, which: usize, ds: &Dataset) -> Result<(), CliError> {
    let w0 = vec![cfg.sigma.sqrt(); ds.dim()];
    let p = build_problem(&ds.inputs, &ds.labels, &w0)?;
    let per_example: Vec<String> = (0..ds.len()).map(|i| format!("x{i}")).collect();
    let identity: Vec<usize> = (0..ds.len()).collect();
    for regime in [Regime::Nonlinear, Regime::Linearized] {
        let horizon = convergence_horizon(&p, 0.99, regime)?;
        let times = log_time_grid(horizon * 1e-6, horizon * 1.5, cfg.points);
        let traj = closed_form(&p, &times, regime)?;
        let examples = group_losses(&p, &traj, &identity, &per_example)?;
        write_curves(ctx, &format!("example{which}_{}.csv", regime.name()), &examples)?;
        let groups = group_losses(&p, &traj, &ds.group_of, &ds.group_names)?;
        write_curves(ctx, &format!("example{which}_{}_groups.csv", regime.name()), &groups)?;
        let halves: Vec<String> = (0..groups.group_names.len())
            .map(|g| match groups.crossing_time(g, 0.5) {
                Some(t) => format!("{} {t:.4e}", groups.group_names[g]),
                None => format!("{} -", groups.group_names[g]),
            })
            .collect();
        println!(
            "example{which} {}: half-loss times {}",
            regime.name(),
            halves.join(", ")
        );
    }
    Ok(())
}

fn mlp_runs(cfg: &ExamplesConfig, which: usize, ds: &Dataset) -> Vec<RunConfig> {
    let m = &cfg.mlp;
    m.alphas
        .iter()
        .map(|&alpha| {
            let mult = if alpha == 1.0 { 1 } else { m.step_multiplier.max(1) };
            let mut train = m.train.build(cfg.seed);
            train.steps *= mult;
            RunConfig {
                dataset: cfg.spec(which),
                test_set: None,
                model: m.model.build(ds.dim(), 1, cfg.seed),
                train,
                alpha,
                probe_every: 0,
                probe_count: 1,
                group_metric_every: m.record_every,
                snapshot_losses: Vec::new(),
                output: None,
            }
        })
        .collect()
}

pub fn run(ctx: &Context, which: Which) -> Result<(), CliError> {
    let cfg: ExamplesConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    if !(cfg.sigma > 0.0) || cfg.points == 0 {
        return Err(CliError::Config("sigma must be > 0 and points >= 1".into()));
    }
    let selected: Vec<usize> = match which {
        Which::One => vec![1],
        Which::Two => vec![2],
        Which::Three => vec![3],
        Which::All => vec![1, 2, 3],
    };
    let mut runs = Vec::new();
    for &k in &selected {
        let ds = build(&cfg, k)?;
        closed_form_curves(ctx, &cfg, k, &ds)?;
        if cfg.mlp.enabled {
            runs.extend(mlp_runs(&cfg, k, &ds).into_iter().map(|r| (k, r)));
        }
    }
    let cfgs: Vec<RunConfig> = runs.iter().map(|(_, r)| r.clone()).collect();
    let outputs = run_all(&cfgs, ctx.jobs)?;
    for ((k, rc), out) in runs.iter().zip(&outputs) {
        save_trace(
            &out.trace,
            &ctx.path(format!("example{k}_mlp_alpha{}.csv", tag(rc.alpha))),
        )?;
        check_diverged(&out.trace, &format!("example{k}, α = {}", rc.alpha))?;
        let show = |f: fn(&lazylab::harness::GroupedTrace, usize, f64) -> Option<f64>| {
            out.trace
                .group_names
                .iter()
                .enumerate()
                .map(|(g, name)| match f(&out.trace, g, 0.5) {
                    Some(s) => format!("{name} {s:.1}"),
                    None => format!("{name} -"),
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!(
            "example{k} mlp α = {}: half-loss steps {}; settled {}",
            rc.alpha,
            show(group_crossing_step),
            show(group_settling_step)
        );
    }
    Ok(())
}

use serde::{Deserialize, Serialize};

use lazylab::harness::{region_deltas, GridSpec, PairedRuns, DEFAULT_STEP_MULTIPLIER};

use super::{check_diverged, run_all, save_trace, seed_list, tag, yin_yang_run};
use crate::config::{ModelSection, TrainSection, YinYangSection};
use crate::{num, write_file, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toy2dConfig {
    pub seed: u64,
    pub seeds: usize,
    pub lazy_alpha: f64,
    /// Step budget of the lazy run relative to the α = 1 run.
    pub step_multiplier: usize,
    /// Mean training losses at which the two runs are compared.
    pub thresholds: Vec<f64>,
    pub group_metric_every: usize,
    pub data: YinYangSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub grid: GridSpec,
}

impl Default for Toy2dConfig {
    fn default() -> Self {
        Toy2dConfig {
            seed: 1,
            seeds: 1,
            lazy_alpha: 100.0,
            step_multiplier: DEFAULT_STEP_MULTIPLIER,
            thresholds: vec![0.2, 0.15],
            group_metric_every: 5,
            data: YinYangSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            grid: GridSpec::default(),
        }
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg: Toy2dConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    if cfg.seeds == 0 {
        return Err(CliError::Config("seeds must be >= 1".into()));
    }
    let seeds = seed_list(cfg.seed, cfg.seeds);
    let mut runs = Vec::new();
    for &s in &seeds {
        for (alpha, mult) in [(1.0, 1), (cfg.lazy_alpha, cfg.step_multiplier)] {
            let mut rc = yin_yang_run(s, &cfg.data, None, &cfg.model, &cfg.train, 1.0).with_alpha(alpha, mult);
            rc.group_metric_every = cfg.group_metric_every;
            rc.probe_every = 0;
            rc.snapshot_losses = cfg.thresholds.clone();
            runs.push(rc);
        }
    }
    let mut outputs = run_all(&runs, ctx.jobs)?.into_iter();

    let mut rows = Vec::new();
    let mut sums = vec![(0.0, 0.0, 0usize); cfg.thresholds.len()];
    for &s in &seeds {
        let pair = PairedRuns {
            nonlinear: outputs.next().expect("two runs per seed"),
            lazy: outputs.next().expect("two runs per seed"),
        };
        let dir = ctx.path(format!("seed{s}"));
        save_trace(&pair.nonlinear.trace, &dir.join("nonlinear.csv"))?;
        save_trace(&pair.lazy.trace, &dir.join("lazy.csv"))?;
        check_diverged(&pair.nonlinear.trace, &format!("seed {s}, α = 1"))?;
        check_diverged(&pair.lazy.trace, &format!("seed {s}, α = {}", cfg.lazy_alpha))?;

        let deltas = region_deltas(&pair, &cfg.grid, cfg.data.margin, cfg.train.loss)?;
        for (k, d) in deltas.into_iter().enumerate() {
            let Some((rd, map)) = d else {
                log::warn!("seed {s}: a run never reached mean loss {}", cfg.thresholds[k]);
                continue;
            };
            let mut buf = Vec::new();
            map.write_csv(&mut buf)?;
            write_file(&dir.join(format!("delta_{}.csv", tag(rd.threshold))), &buf)?;
            sums[k].0 += rd.easy;
            sums[k].1 += rd.eye;
            sums[k].2 += 1;
            rows.push(vec![
                s.to_string(),
                num(rd.threshold),
                rd.step_nonlinear.to_string(),
                rd.step_lazy.to_string(),
                num(rd.easy),
                num(rd.eye),
            ]);
        }
    }
    write_rows(
        &ctx.path("region_deltas.csv"),
        &["seed", "threshold", "step_nonlinear", "step_lazy", "easy", "eye"],
        &rows,
    )?;
    for (t, (easy, eye, count)) in cfg.thresholds.iter().zip(sums) {
        if count > 0 {
            let c = count as f64;
            println!(
                "loss {t}: mean Δloss easy {:+.4}, eyes {:+.4} over {count} seeds",
                easy / c,
                eye / c
            );
        }
    }
    Ok(())
}

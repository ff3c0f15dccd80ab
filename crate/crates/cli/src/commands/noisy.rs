use serde::{Deserialize, Serialize};

use lazylab::data::{NoiseSpec, CLEAN, NOISY};
use lazylab::harness::{clean_first, DatasetSpec};
use lazylab::rng::mix_seed;

use super::{check_diverged, run_all, save_trace, seed_list, yin_yang_run};
use crate::config::{ModelSection, TrainSection, YinYangSection};
use crate::{num, opt_num, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyConfig {
    pub seed: u64,
    pub seeds: usize,
    /// Fraction of training labels flipped.
    pub fraction: f64,
    pub lazy_alpha: f64,
    /// The lazy run is slow to fit the clean group; it gets this many times the steps.
    pub step_multiplier: usize,
    /// Size of the clean held-out set (0 disables it).
    pub test_n: usize,
    pub group_metric_every: usize,
    pub data: YinYangSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for NoisyConfig {
    fn default() -> Self {
        NoisyConfig {
            seed: 1,
            seeds: 5,
            fraction: 0.15,
            lazy_alpha: 100.0,
            step_multiplier: 20,
            test_n: 500,
            group_metric_every: 5,
            data: YinYangSection::default(),
            model: ModelSection::default(),
            train: TrainSection {
                steps: 1000,
                ..TrainSection::default()
            },
        }
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg: NoisyConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    if cfg.seeds == 0 {
        return Err(CliError::Config("seeds must be >= 1".into()));
    }
    let seeds = seed_list(cfg.seed, cfg.seeds);
    let mut runs = Vec::new();
    for &s in &seeds {
        let noise = NoiseSpec {
            fraction: cfg.fraction,
            seed: mix_seed(s, 1),
        };
        for (alpha, mult) in [(1.0, 1), (cfg.lazy_alpha, cfg.step_multiplier)] {
            let mut rc = yin_yang_run(s, &cfg.data, Some(noise), &cfg.model, &cfg.train, 1.0).with_alpha(alpha, mult);
            rc.group_metric_every = cfg.group_metric_every;
            rc.probe_every = 0;
            if cfg.test_n > 0 {
                rc.test_set = Some(DatasetSpec::YinYang {
                    n: cfg.test_n,
                    seed: mix_seed(s, 2),
                    margin: cfg.data.margin,
                    noise: None,
                });
            }
            runs.push(rc);
        }
    }
    let mut outputs = run_all(&runs, ctx.jobs)?.into_iter();

    let mut rows = Vec::new();
    for &s in &seeds {
        let nl = outputs.next().expect("two runs per seed");
        let lazy = outputs.next().expect("two runs per seed");
        let dir = ctx.path(format!("seed{s}"));
        save_trace(&nl.trace, &dir.join("nonlinear.csv"))?;
        save_trace(&lazy.trace, &dir.join("lazy.csv"))?;
        check_diverged(&nl.trace, &format!("seed {s}, α = 1"))?;
        check_diverged(&lazy.trace, &format!("seed {s}, α = {}", cfg.lazy_alpha))?;

        let Some(cf) = clean_first(&nl.trace, &lazy.trace, 2)? else {
            log::warn!("seed {s}: the α = 1 run never fit the noisy labels above chance");
            let mut blank = vec![String::new(); 9];
            blank[0] = s.to_string();
            rows.push(blank);
            continue;
        };
        let step = |p: &Option<lazylab::harness::ProgressPoint>| p.as_ref().map(|p| p.step);
        let acc = |p: &Option<lazylab::harness::ProgressPoint>, g: usize| p.as_ref().and_then(|p| p.group_acc[g]);
        if cf.pair.b.is_none() {
            log::warn!(
                "seed {s}: the lazy run never reached clean loss {:.4}",
                cf.pair.threshold
            );
        }
        rows.push(vec![
            s.to_string(),
            cf.onset_step.to_string(),
            num(cf.pair.threshold),
            opt_num(step(&cf.pair.a)),
            opt_num(step(&cf.pair.b)),
            opt_num(acc(&cf.pair.a, CLEAN)),
            opt_num(acc(&cf.pair.b, CLEAN)),
            opt_num(acc(&cf.pair.a, NOISY)),
            opt_num(acc(&cf.pair.b, NOISY)),
        ]);
    }
    write_rows(
        &ctx.path("clean_first.csv"),
        &[
            "seed",
            "onset_step",
            "clean_loss",
            "step_nonlinear",
            "step_lazy",
            "clean_acc_nonlinear",
            "clean_acc_lazy",
            "noisy_acc_nonlinear",
            "noisy_acc_lazy",
        ],
        &rows,
    )
}

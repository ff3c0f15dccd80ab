use serde::{Deserialize, Serialize};

use super::{check_diverged, run_all, save_trace, seed_list, tag, yin_yang_run};
use crate::config::{ModelSection, TrainSection, YinYangSection};
use crate::{opt_num, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub seed: u64,
    pub seeds: usize,
    pub alphas: Vec<f64>,
    pub probe_every: usize,
    pub probe_count: usize,
    pub data: YinYangSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 1,
            seeds: 1,
            alphas: vec![1.0, 100.0],
            probe_every: 10,
            probe_count: 64,
            data: YinYangSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg: ProbeConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    if cfg.seeds == 0 || cfg.alphas.is_empty() {
        return Err(CliError::Config("need at least one seed and one alpha".into()));
    }
    let seeds = seed_list(cfg.seed, cfg.seeds);
    let mut runs = Vec::new();
    for &s in &seeds {
        for &alpha in &cfg.alphas {
            let mut rc = yin_yang_run(s, &cfg.data, None, &cfg.model, &cfg.train, alpha);
            rc.probe_every = cfg.probe_every;
            rc.group_metric_every = cfg.probe_every;
            rc.probe_count = cfg.probe_count;
            runs.push(rc);
        }
    }
    let outputs = run_all(&runs, ctx.jobs)?;

    let mut rows = Vec::new();
    for (rc, out) in runs.iter().zip(&outputs) {
        let s = rc.model.seed;
        save_trace(&out.trace, &ctx.path(format!("seed{s}/alpha{}.csv", tag(rc.alpha))))?;
        check_diverged(&out.trace, &format!("seed {s}, α = {}", rc.alpha))?;
        let probes: Vec<_> = out.trace.records.iter().filter_map(|r| r.probe).collect();
        let min = |f: fn(&lazylab::harness::ProbeValues) -> f64| probes.iter().map(f).reduce(f64::min);
        let last = probes.last();
        rows.push(vec![
            s.to_string(),
            rc.alpha.to_string(),
            opt_num(last.map(|p| p.sign)),
            opt_num(last.map(|p| p.ntk)),
            opt_num(last.map(|p| p.repr)),
            opt_num(min(|p| p.sign)),
            opt_num(min(|p| p.ntk)),
            opt_num(min(|p| p.repr)),
        ]);
    }
    write_rows(
        &ctx.path("probes.csv"),
        &[
            "seed",
            "alpha",
            "final_sign",
            "final_ntk",
            "final_repr",
            "min_sign",
            "min_ntk",
            "min_repr",
        ],
        &rows,
    )
}

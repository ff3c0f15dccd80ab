use serde::{Deserialize, Serialize};

use lazylab::data::{estimate_cscores, load_scores_and_group, yin_yang, CScoreConfig};

use crate::config::{ModelSection, TrainSection, YinYangSection};
use crate::{num, write_file, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CscoreSection {
    pub seed: u64,
    /// Trials per example and subset size.
    pub r: usize,
    pub subset_sizes: Vec<usize>,
    /// Quantile groups formed from the scores.
    pub bins: usize,
    pub data: YinYangSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for CscoreSection {
    fn default() -> Self {
        CscoreSection {
            seed: 1,
            r: 8,
            subset_sizes: vec![10, 20, 30],
            bins: 4,
            data: YinYangSection { n: 40, margin: 0.1 },
            model: ModelSection {
                hidden: vec![32, 32],
                ..ModelSection::default()
            },
            train: TrainSection {
                steps: 200,
                ..TrainSection::default()
            },
        }
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg: CscoreSection = ctx.load()?;
    ctx.echo(&cfg)?;
    let ds = yin_yang(cfg.data.n, cfg.seed, cfg.data.margin)?;
    let est = CScoreConfig {
        r: cfg.r,
        subset_sizes: cfg.subset_sizes.clone(),
        model: cfg.model.build(2, 1, cfg.seed),
        train: cfg.train.build(cfg.seed),
        seed: cfg.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} jobs: {e}", ctx.jobs)))?;
    let scores = pool.install(|| estimate_cscores(&ds, &est))?;
    let grouped = load_scores_and_group(&ds, &scores, cfg.bins)?;

    let text: String = scores.iter().map(|s| format!("{}\n", num(*s))).collect();
    write_file(&ctx.path("scores.txt"), text.as_bytes())?;
    let rows: Vec<Vec<String>> = (0..ds.len())
        .map(|i| {
            let x = ds.inputs.row(i);
            vec![
                i.to_string(),
                num(x[0]),
                num(x[1]),
                ds.labels[i].to_string(),
                ds.group_names[ds.group_of[i]].clone(),
                num(scores[i]),
                grouped.group_names[grouped.group_of[i]].clone(),
            ]
        })
        .collect();
    write_rows(
        &ctx.path("cscores.csv"),
        &["index", "x0", "x1", "label", "region", "score", "bin"],
        &rows,
    )
}

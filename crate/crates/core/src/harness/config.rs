use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{example1, example2, example3, flip_labels, yin_yang, Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::nn::{MlpConfig, TrainConfig};

/// Recipe for a dataset; `kind` selects the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    YinYang {
        n: usize,
        seed: u64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        noise: Option<NoiseSpec>,
    },
    Example1 {
        mu: Vec<f64>,
    },
    Example2 {
        n: usize,
        d: usize,
        q: usize,
        feat_scale: f64,
        seed: u64,
    },
    Example3 {
        n: usize,
        d: usize,
        q: usize,
        spur_scale: f64,
        feat_scale: f64,
        seed: u64,
    },
}

fn default_margin() -> f64 {
    0.1
}

impl DatasetSpec {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::YinYang { n, seed, margin, noise } => {
                if *n == 0 {
                    return Err(Error::Config("dataset.n must be >= 1".into()));
                }
                let ds = yin_yang(*n, *seed, *margin)?;
                match noise {
                    Some(spec) => flip_labels(&ds, *spec),
                    None => Ok(ds),
                }
            }
            DatasetSpec::Example1 { mu } => example1(mu),
            DatasetSpec::Example2 {
                n,
                d,
                q,
                feat_scale,
                seed,
            } => example2(*n, *d, *q, *feat_scale, *seed),
            DatasetSpec::Example3 {
                n,
                d,
                q,
                spur_scale,
                feat_scale,
                seed,
            } => example3(*n, *d, *q, *spur_scale, *feat_scale, *seed),
        }
    }
}

fn one() -> usize {
    1
}

fn default_probe_count() -> usize {
    64
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Held-out evaluation set, scored at every record.
    #[serde(default)]
    pub test_set: Option<DatasetSpec>,
    pub model: MlpConfig,
    pub train: TrainConfig,
    pub alpha: f64,
    /// Steps between linearity probes; 0 turns them off.
    #[serde(default = "one")]
    pub probe_every: usize,
    /// Training points used for the linearity probes.
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default = "one")]
    pub group_metric_every: usize,
    /// Mean-loss levels at which to keep a copy of the model.
    #[serde(default)]
    pub snapshot_losses: Vec<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_metric_every == 0 {
            return Err(Error::Config("group_metric_every must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if let Some(t) = self.snapshot_losses.iter().find(|t| !t.is_finite()) {
            return Err(Error::Config(format!("snapshot loss {t} is not finite")));
        }
        self.model.validate()?;
        self.train.validate()
    }

    /// Same run at another α, with the step budget multiplied by `step_multiplier`.
    pub fn with_alpha(&self, alpha: f64, step_multiplier: usize) -> RunConfig {
        let mut cfg = self.clone();
        cfg.alpha = alpha;
        cfg.train.steps = self.train.steps * step_multiplier.max(1);
        cfg
    }
}

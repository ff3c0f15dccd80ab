//! Held-out consistency estimate: how often a model trained on random
//! subsets that exclude an example still classifies it correctly.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{alpha_predict, fit, init_mlp, AlphaModel, MlpConfig, TrainConfig};
use crate::rng::{mix_seed, rng_for};

use super::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CScoreConfig {
    /// Subsets drawn per example and size.
    pub r: usize,
    pub subset_sizes: Vec<usize>,
    pub model: MlpConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl CScoreConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("r must be >= 1".into()));
        }
        if self.subset_sizes.is_empty() {
            return Err(Error::Config("subset_sizes must not be empty".into()));
        }
        if let Some(s) = self.subset_sizes.iter().find(|&&s| s == 0 || s >= n) {
            return Err(Error::Config(format!(
                "subset size {s} outside [1, {}]",
                n.saturating_sub(1)
            )));
        }
        self.model.validate()?;
        self.train.validate()
    }
}

/// Whether a model trained on `train_idx` classifies `target` correctly.
fn trial(ds: &Dataset, cfg: &CScoreConfig, target: usize, train_idx: &[usize], trial_seed: u64) -> Result<bool> {
    let model_cfg = MlpConfig {
        seed: mix_seed(cfg.model.seed, trial_seed),
        ..cfg.model.clone()
    };
    let train = TrainConfig {
        shuffle_seed: mix_seed(cfg.train.shuffle_seed, trial_seed),
        ..cfg.train.clone()
    };
    let x = ds.inputs.select_rows(train_idx);
    let y: Vec<f64> = train_idx.iter().map(|&i| ds.labels[i]).collect();
    let mut am = AlphaModel::new(init_mlp(&model_cfg)?, 1.0)?;
    fit(&mut am, &x, &y, &train)?;
    let out = alpha_predict(&am, &ds.inputs.select_rows(&[target]))?;
    Ok(cfg.train.loss_kind.is_correct(out.row(0), ds.labels[target]))
}

/// Score per example in `[0, 1]`: the fraction of `(size, repeat)` trials
/// whose held-out model gets it right.
pub fn estimate_cscores(ds: &Dataset, cfg: &CScoreConfig) -> Result<Vec<f64>> {
    let n = ds.len();
    cfg.validate(n)?;
    if cfg.model.input_dim() != ds.dim() {
        return Err(Error::Shape(format!(
            "model takes {} inputs, dataset has {}",
            cfg.model.input_dim(),
            ds.dim()
        )));
    }
    let per_example = cfg.subset_sizes.len() * cfg.r;
    let jobs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..per_example).map(move |t| (i, t))).collect();
    let hits: Vec<Result<bool>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let size = cfg.subset_sizes[t / cfg.r];
            // dedicated stream per example keeps examples independent
            let mut rng = rng_for(mix_seed(cfg.seed, i as u64), t as u64);
            let train_idx: Vec<usize> = index::sample(&mut rng, n - 1, size)
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j })
                .collect();
            trial(ds, cfg, i, &train_idx, mix_seed(i as u64, t as u64))
        })
        .collect();
    let mut scores = vec![0.0; n];
    for (&(i, _), hit) in jobs.iter().zip(hits) {
        if hit? {
            scores[i] += 1.0;
        }
    }
    scores.iter_mut().for_each(|s| *s /= per_example as f64);
    Ok(scores)
}

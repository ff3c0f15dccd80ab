//! Synthetic datasets, label noise, difficulty grouping, and a small
//! consistency-score estimator.

mod cscore;
mod dataset;
mod examples;
mod noise;
mod scores;
pub mod yinyang;

pub use cscore::{estimate_cscores, CScoreConfig};
pub use dataset::{Dataset, DatasetMeta};
pub use examples::{example1, example2, example3};
pub use noise::{flip_labels, NoiseSpec, CLEAN, NOISY};
pub use scores::{load_scores_and_group, parse_scores, quantile_bins, read_scores};
pub use yinyang::yin_yang;

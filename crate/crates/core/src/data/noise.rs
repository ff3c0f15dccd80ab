use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::dataset::Dataset;

pub const CLEAN: usize = 0;
pub const NOISY: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

/// Reassigns exactly `round(fraction·n)` labels to a uniformly drawn
/// different class. Groups become `clean`/`noisy`; the original labels are
/// kept in the metadata.
pub fn flip_labels(ds: &Dataset, spec: NoiseSpec) -> Result<Dataset> {
    if !(0.0..1.0).contains(&spec.fraction) {
        return Err(Error::Config(format!(
            "noise fraction must lie in [0, 1), got {}",
            spec.fraction
        )));
    }
    let k = match ds.num_classes {
        Some(k) if k >= 2 => k,
        _ => {
            return Err(Error::Config(
                "label noise needs a classification dataset with >= 2 classes".into(),
            ))
        }
    };
    let n = ds.len();
    let count = (spec.fraction * n as f64).round() as usize;
    let mut rng = rng_for(spec.seed, 0xF11);
    let mut out = ds.clone();
    out.group_of = vec![CLEAN; n];
    out.group_names = vec!["clean".into(), "noisy".into()];
    for i in index::sample(&mut rng, n, count).into_iter() {
        let old = ds.labels[i] as usize;
        // uniform over the k − 1 other classes
        let mut c = rng.random_range(0..k - 1);
        if c >= old {
            c += 1;
        }
        out.labels[i] = c as f64;
        out.group_of[i] = NOISY;
    }
    out.meta.original_labels = Some(ds.labels.clone());
    out.meta
        .params
        .insert("noise_fraction".into(), spec.fraction.to_string());
    out.meta.params.insert("noise_seed".into(), spec.seed.to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::DatasetMeta;
    use crate::linalg::Matrix;

    fn classes(n: usize, k: usize) -> Dataset {
        Dataset::new(
            Matrix::zeros(n, 1),
            (0..n).map(|i| (i % k) as f64).collect(),
            Some(k),
            vec![0; n],
            vec!["all".into()],
            DatasetMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn exact_count_and_all_different() {
        let ds = classes(1000, 3);
        let noisy = flip_labels(
            &ds,
            NoiseSpec {
                fraction: 0.15,
                seed: 9,
            },
        )
        .unwrap();
        let flipped: Vec<usize> = (0..1000).filter(|&i| noisy.labels[i] != ds.labels[i]).collect();
        assert_eq!(flipped.len(), 150);
        assert_eq!(noisy.members(NOISY), flipped);
        assert_eq!(noisy.meta.original_labels.as_ref().unwrap(), &ds.labels);
    }

    #[test]
    fn zero_fraction_is_identity_on_labels() {
        let ds = classes(20, 2);
        let out = flip_labels(&ds, NoiseSpec { fraction: 0.0, seed: 1 }).unwrap();
        assert_eq!(out.labels, ds.labels);
        assert_eq!(out.inputs, ds.inputs);
        assert!(out.group_of.iter().all(|&g| g == CLEAN));
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = classes(10, 2);
        assert!(flip_labels(&ds, NoiseSpec { fraction: 1.0, seed: 1 }).is_err());
        let mut reg = ds.clone();
        reg.num_classes = None;
        assert!(flip_labels(&reg, NoiseSpec { fraction: 0.1, seed: 1 }).is_err());
    }
}

//! Constructed regression problems with a known mode structure.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_for;

use super::dataset::{Dataset, DatasetMeta};

fn meta(generator: &str, params: &[(&str, String)], seed: Option<u64>) -> DatasetMeta {
    DatasetMeta {
        generator: generator.into(),
        params: params
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>(),
        seed,
        original_labels: None,
    }
}

/// `x_i = √μ_i e_i`, `y_i = μ_{n−i+1} / √μ_i`: mode `i` carries correlation
/// `μ_{n−i+1}`, so the ordering by `μ` and the ordering by correlation are
/// reversed. Each example is its own group.
pub fn example1(mu: &[f64]) -> Result<Dataset> {
    let n = mu.len();
    if n == 0 {
        return Err(Error::Config("mu must not be empty".into()));
    }
    if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::Config(format!("mu must be strictly positive, got {m}")));
    }
    if mu.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Config("mu must be nonincreasing".into()));
    }
    let mut x = Matrix::zeros(n, n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        x.set(i, i, mu[i].sqrt());
        y.push(mu[n - 1 - i] / mu[i].sqrt());
    }
    Dataset::new(
        x,
        y,
        None,
        (0..n).collect(),
        (0..n).map(|i| format!("example{}", i + 1)).collect(),
        meta("example1", &[("mu", format!("{mu:?}"))], None),
    )
}

fn balanced_signs(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n).map(|i| if i < n.div_ceil(2) { 1.0 } else { -1.0 }).collect();
    y.shuffle(rng);
    y
}

fn check_q(n: usize, q: usize) -> Result<()> {
    if q < 1 || q >= n.div_ceil(2) {
        return Err(Error::Config(format!(
            "q must lie in [1, ceil(n/2)) = [1, {}), got {q}",
            n.div_ceil(2)
        )));
    }
    Ok(())
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

/// Returns (labels, κ) with κ = −1 on exactly `q` seeded positions.
fn labels_and_kappa(n: usize, q: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(seed, 0xE2);
    let y = balanced_signs(n, &mut rng);
    let mut kappa = vec![1.0; n];
    for i in index::sample(&mut rng, n, q) {
        kappa[i] = -1.0;
    }
    (y, kappa)
}

/// `x_i = κ_i y_i e₁ + feat_scale·e_{i+1}`; the `q` examples with `κ = −1`
/// form the `noisy` group.
pub fn example2(n: usize, d: usize, q: usize, feat_scale: f64, seed: u64) -> Result<Dataset> {
    if d <= n {
        return Err(Error::Config(format!("example2 needs d > n, got d={d}, n={n}")));
    }
    check_q(n, q)?;
    check_scale("feat_scale", feat_scale)?;
    let (y, kappa) = labels_and_kappa(n, q, seed);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        x.set(i, 0, kappa[i] * y[i]);
        x.set(i, i + 1, feat_scale);
    }
    Dataset::new(
        x,
        y,
        None,
        kappa.iter().map(|&k| usize::from(k < 0.0)).collect(),
        vec!["clean".into(), "noisy".into()],
        meta(
            "example2",
            &[
                ("n", n.to_string()),
                ("d", d.to_string()),
                ("q", q.to_string()),
                ("feat_scale", feat_scale.to_string()),
            ],
            Some(seed),
        ),
    )
}

/// `x_i = κ_i y_i e₁ + spur_scale·y_i e₂ + feat_scale·e_{i+2}`; groups
/// `majority` (κ = 1) and `minority` (κ = −1, `q` examples).
pub fn example3(n: usize, d: usize, q: usize, spur_scale: f64, feat_scale: f64, seed: u64) -> Result<Dataset> {
    if d <= n + 1 {
        return Err(Error::Config(format!("example3 needs d > n + 1, got d={d}, n={n}")));
    }
    check_q(n, q)?;
    if !(spur_scale > 0.0 && spur_scale < 1.0) {
        return Err(Error::Config(format!(
            "spur_scale must lie in (0, 1), got {spur_scale}"
        )));
    }
    check_scale("feat_scale", feat_scale)?;
    let (y, kappa) = labels_and_kappa(n, q, seed);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        x.set(i, 0, kappa[i] * y[i]);
        x.set(i, 1, spur_scale * y[i]);
        x.set(i, i + 2, feat_scale);
    }
    Dataset::new(
        x,
        y,
        None,
        kappa.iter().map(|&k| usize::from(k < 0.0)).collect(),
        vec!["majority".into(), "minority".into()],
        meta(
            "example3",
            &[
                ("n", n.to_string()),
                ("d", d.to_string()),
                ("q", q.to_string()),
                ("spur_scale", spur_scale.to_string()),
                ("feat_scale", feat_scale.to_string()),
            ],
            Some(seed),
        ),
    )
}

//! Linearity metrics of a trained model relative to its initialization.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::nn::{forward_cached, jacobian_features, Activation, ModelState};
use crate::rng::rng_for;

/// Symmetric Gram matrix of a kernel on a probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram {
    values: Matrix,
    probe_ids: Vec<usize>,
}

impl KernelGram {
    pub fn new(values: Matrix, probe_ids: Vec<usize>) -> Result<Self> {
        let n = values.rows();
        if values.cols() != n || probe_ids.len() != n {
            return Err(Error::Shape(format!(
                "gram is {}x{} with {} probe ids",
                values.rows(),
                values.cols(),
                probe_ids.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (values.get(i, j), values.get(j, i));
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Shape(format!("gram not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(KernelGram { values, probe_ids })
    }

    /// Gram of the rows of `features`: `K_ij = φ_iᵀ φ_j`.
    fn from_features(features: &[Vec<f64>], probe_ids: Vec<usize>) -> Self {
        let n = features.len();
        let mut values = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = dot(&features[i], &features[j]);
                values.set(i, j, k);
                values.set(j, i, k);
            }
        }
        KernelGram { values, probe_ids }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn probe_ids(&self) -> &[usize] {
        &self.probe_ids
    }

    pub fn len(&self) -> usize {
        self.probe_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probe_ids.is_empty()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.values.get(i, i)).sum()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let eig = nalgebra::SymmetricEigen::new(self.values.to_nalgebra());
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// PSD up to `1e-8 · trace / n`.
    pub fn is_psd(&self) -> bool {
        let n = self.len().max(1) as f64;
        self.min_eigenvalue() >= -1e-8 * self.trace().abs() / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub step: usize,
    pub sign_similarity: f64,
    pub ntk_alignment: f64,
    pub representation_alignment: f64,
}

fn check_pair(model_t: &ModelState, model_0: &ModelState) -> Result<()> {
    if model_t.topology().layer_widths != model_0.topology().layer_widths
        || model_t.topology().activation != model_0.topology().activation
        || model_t.topology().bias != model_0.topology().bias
    {
        return Err(Error::Topology("models differ in topology".into()));
    }
    Ok(())
}

/// Fraction of (probe, hidden unit) pairs whose ReLU status (preactivation
/// > 0) agrees between the two models.
pub fn sign_similarity(model_t: &ModelState, model_0: &ModelState, probe_inputs: &Matrix) -> Result<f64> {
    check_pair(model_t, model_0)?;
    if model_t.topology().activation != Activation::Relu {
        return Err(Error::UnsupportedActivation(
            "sign similarity is defined for ReLU networks".into(),
        ));
    }
    if model_t.topology().num_hidden_layers() == 0 {
        return Err(Error::Topology("sign similarity needs a hidden layer".into()));
    }
    let a = forward_cached(model_t, probe_inputs)?;
    let b = forward_cached(model_0, probe_inputs)?;
    let hidden = a.pre.len() - 1;
    let mut same = 0usize;
    let mut total = 0usize;
    for l in 0..hidden {
        for (za, zb) in a.pre[l].as_slice().iter().zip(b.pre[l].as_slice()) {
            if (*za > 0.0) == (*zb > 0.0) {
                same += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Shape("empty probe set".into()));
    }
    Ok(same as f64 / total as f64)
}

/// Empirical tangent kernel, summed over output dimensions.
pub fn tangent_gram(model: &ModelState, probe_inputs: &Matrix) -> Result<KernelGram> {
    tangent_gram_with_ids(model, probe_inputs, (0..probe_inputs.rows()).collect())
}

pub fn tangent_gram_with_ids(model: &ModelState, probe_inputs: &Matrix, probe_ids: Vec<usize>) -> Result<KernelGram> {
    if probe_inputs.rows() == 0 {
        return Err(Error::Shape("empty probe set".into()));
    }
    let features = probe_inputs
        .iter_rows()
        .map(|x| jacobian_features(model, x).map(|j| j.as_slice().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    KernelGram::new(
        KernelGram::from_features(&features, probe_ids.clone()).values,
        probe_ids,
    )
}

/// Gram of last-hidden-layer post-activations.
pub fn representation_gram(model: &ModelState, probe_inputs: &Matrix) -> Result<KernelGram> {
    representation_gram_with_ids(model, probe_inputs, (0..probe_inputs.rows()).collect())
}

pub fn representation_gram_with_ids(
    model: &ModelState,
    probe_inputs: &Matrix,
    probe_ids: Vec<usize>,
) -> Result<KernelGram> {
    if probe_inputs.rows() == 0 {
        return Err(Error::Shape("empty probe set".into()));
    }
    let cache = forward_cached(model, probe_inputs)?;
    let rep = cache
        .last_hidden()
        .ok_or_else(|| Error::Topology("representation needs at least one hidden layer".into()))?;
    let features: Vec<Vec<f64>> = rep.iter_rows().map(<[f64]>::to_vec).collect();
    KernelGram::new(
        KernelGram::from_features(&features, probe_ids.clone()).values,
        probe_ids,
    )
}

/// Uncentered kernel alignment `Tr[Ka Kb] / (‖Ka‖_F ‖Kb‖_F)`.
pub fn kernel_alignment(ka: &KernelGram, kb: &KernelGram) -> Result<f64> {
    if ka.probe_ids != kb.probe_ids {
        return Err(Error::Shape("grams are over different probe sets".into()));
    }
    let (na, nb) = (ka.frobenius_norm(), kb.frobenius_norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateKernel("gram has zero Frobenius norm".into()));
    }
    let n = ka.len();
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += ka.values.get(i, j) * kb.values.get(j, i);
        }
    }
    Ok(tr / (na * nb))
}

/// Sign similarity plus tangent and representation alignment against the
/// initialization.
pub fn probe_report(
    model_t: &ModelState,
    model_0: &ModelState,
    probe_inputs: &Matrix,
    step: usize,
) -> Result<ProbeReport> {
    check_pair(model_t, model_0)?;
    let sign = sign_similarity(model_t, model_0, probe_inputs)?;
    let ntk = kernel_alignment(
        &tangent_gram(model_t, probe_inputs)?,
        &tangent_gram(model_0, probe_inputs)?,
    )?;
    let repr = kernel_alignment(
        &representation_gram(model_t, probe_inputs)?,
        &representation_gram(model_0, probe_inputs)?,
    )?;
    Ok(ProbeReport {
        step,
        sign_similarity: sign,
        ntk_alignment: ntk,
        representation_alignment: repr,
    })
}

/// Probe ids: a seeded subset of `0..n` of size `min(n, max_size)`, sorted.
pub fn select_probes(n: usize, max_size: usize, seed: u64) -> Vec<usize> {
    let k = n.min(max_size);
    let mut rng = rng_for(seed, 0x9807e);
    let mut ids = sample(&mut rng, n, k).into_vec();
    ids.sort_unstable();
    ids
}

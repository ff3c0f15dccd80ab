use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::mlp::{backward, forward_cached, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `½ Σ_k (f_k − t_k)²`; scalar target for one output, one-hot class otherwise.
    Mse,
    /// Single logit against a {0, 1} label.
    BinaryCrossEntropy,
    /// Logits against a class index.
    SoftmaxCrossEntropy,
}

fn class_index(label: f64, k: usize) -> Result<usize> {
    if label < 0.0 || label.fract() != 0.0 || label as usize >= k {
        return Err(Error::Shape(format!("label {label} is not a class index below {k}")));
    }
    Ok(label as usize)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossKind {
    /// Loss of one example; writes `∂loss/∂output` into `grad` when given.
    pub fn eval(self, out: &[f64], label: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        let k = out.len();
        match self {
            LossKind::Mse => {
                let mut loss = 0.0;
                let target = |j: usize| -> Result<f64> {
                    if k == 1 {
                        Ok(label)
                    } else {
                        Ok(if class_index(label, k)? == j { 1.0 } else { 0.0 })
                    }
                };
                let mut g = grad;
                for (j, &o) in out.iter().enumerate() {
                    let r = o - target(j)?;
                    loss += 0.5 * r * r;
                    if let Some(g) = g.as_deref_mut() {
                        g[j] = r;
                    }
                }
                Ok(loss)
            }
            LossKind::BinaryCrossEntropy => {
                if k != 1 {
                    return Err(Error::Shape(format!("binary cross-entropy needs 1 output, got {k}")));
                }
                if label != 0.0 && label != 1.0 {
                    return Err(Error::Shape(format!("binary label must be 0 or 1, got {label}")));
                }
                let z = out[0];
                if let Some(g) = grad {
                    g[0] = sigmoid(z) - label;
                }
                Ok(softplus(z) - label * z)
            }
            LossKind::SoftmaxCrossEntropy => {
                let c = class_index(label, k)?;
                let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = out.iter().map(|&z| (z - m).exp()).sum();
                let lse = m + sum.ln();
                if let Some(g) = grad {
                    for (j, &z) in out.iter().enumerate() {
                        g[j] = (z - lse).exp() - if j == c { 1.0 } else { 0.0 };
                    }
                }
                Ok(lse - out[c])
            }
        }
    }

    pub fn is_correct(self, out: &[f64], label: f64) -> bool {
        match self {
            LossKind::Mse if out.len() == 1 => {
                // regression targets are ±1 or {0,1}; compare against the midpoint
                if label == 0.0 || label == 1.0 {
                    (out[0] > 0.5) == (label == 1.0)
                } else {
                    out[0].signum() == label.signum()
                }
            }
            LossKind::BinaryCrossEntropy => (out[0] > 0.0) == (label == 1.0),
            _ => argmax(out) as f64 == label,
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_batch(inputs: &Matrix, labels: &[f64]) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    if inputs.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} labels",
            inputs.rows(),
            labels.len()
        )));
    }
    if !inputs.is_finite() {
        return Err(Error::Numeric("non-finite value in inputs".into()));
    }
    if labels.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite value in labels".into()));
    }
    Ok(())
}

/// Per-example losses and cotangents for a matrix of outputs, with the
/// cotangent rows scaled by `scale`.
pub(crate) fn output_cotangents(
    kind: LossKind,
    outputs: &Matrix,
    labels: &[f64],
    scale: f64,
) -> Result<(Vec<f64>, Matrix)> {
    let mut seed = Matrix::zeros(outputs.rows(), outputs.cols());
    let mut losses = Vec::with_capacity(outputs.rows());
    for (b, &label) in labels.iter().enumerate() {
        let row = seed.row_mut(b);
        losses.push(kind.eval(outputs.row(b), label, Some(row))?);
        row.iter_mut().for_each(|g| *g *= scale);
    }
    Ok((losses, seed))
}

/// Mean loss over the batch and its gradient with respect to the parameters.
pub fn loss_and_grad(model: &ModelState, inputs: &Matrix, labels: &[f64], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    check_batch(inputs, labels)?;
    let cache = forward_cached(model, inputs)?;
    let n = labels.len() as f64;
    let (losses, seed) = output_cotangents(kind, cache.output(), labels, 1.0 / n)?;
    let mut grad = vec![0.0; model.param_count()];
    backward(model, &cache, &seed, &mut grad);
    Ok((losses.iter().sum::<f64>() / n, grad))
}

/// Mean loss only.
pub fn mean_loss(model: &ModelState, inputs: &Matrix, labels: &[f64], kind: LossKind) -> Result<f64> {
    check_batch(inputs, labels)?;
    let out = super::mlp::forward(model, inputs)?;
    let mut total = 0.0;
    for (b, &l) in labels.iter().enumerate() {
        total += kind.eval(out.row(b), l, None)?;
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::MlpConfig;

    fn scalar_model(theta: f64) -> ModelState {
        let cfg = MlpConfig {
            bias: false,
            ..MlpConfig::relu(vec![1, 1], 0)
        };
        ModelState::from_params(cfg, vec![theta]).unwrap()
    }

    #[test]
    fn mse_scalar_by_hand() {
        // f(x) = θx at θ = 1, x = 2, y = 0: loss = ½·4 = 2, dℓ/dθ = (θx − y)·x = 4
        let m = scalar_model(1.0);
        let x = Matrix::from_rows(&[[2.0]]).unwrap();
        let (loss, grad) = loss_and_grad(&m, &x, &[0.0], LossKind::Mse).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(grad, vec![4.0]);
    }

    #[test]
    fn zero_residual_gives_zero_loss_and_grad() {
        let m = scalar_model(1.5);
        let x = Matrix::from_rows(&[[2.0], [-1.0]]).unwrap();
        let (loss, grad) = loss_and_grad(&m, &x, &[3.0, -1.5], LossKind::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0]);
    }

    #[test]
    fn nan_input_is_numeric_error() {
        let m = scalar_model(1.0);
        let x = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(matches!(
            loss_and_grad(&m, &x, &[0.0], LossKind::Mse),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn empty_batch_rejected() {
        let m = scalar_model(1.0);
        let x = Matrix::zeros(0, 1);
        assert!(loss_and_grad(&m, &x, &[], LossKind::Mse).is_err());
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let l = LossKind::BinaryCrossEntropy.eval(&[800.0], 1.0, None).unwrap();
        assert!(l.abs() < 1e-300);
        let l = LossKind::BinaryCrossEntropy.eval(&[-800.0], 1.0, None).unwrap();
        assert_eq!(l, 800.0);
        let l0 = LossKind::BinaryCrossEntropy.eval(&[0.0], 0.0, None).unwrap();
        assert!((l0 - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_ce_uniform_logits() {
        let mut g = [0.0; 4];
        let l = LossKind::SoftmaxCrossEntropy
            .eval(&[1.0, 1.0, 1.0, 1.0], 2.0, Some(&mut g))
            .unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        for (a, b) in g.iter().zip([0.25, 0.25, -0.75, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(LossKind::SoftmaxCrossEntropy.eval(&[0.0, 0.0], 2.0, None).is_err());
    }

    #[test]
    fn correctness_predicates() {
        assert!(LossKind::BinaryCrossEntropy.is_correct(&[0.3], 1.0));
        assert!(LossKind::BinaryCrossEntropy.is_correct(&[-0.3], 0.0));
        assert!(LossKind::Mse.is_correct(&[-0.2], -1.0));
        assert!(!LossKind::Mse.is_correct(&[0.2], -1.0));
        assert!(LossKind::SoftmaxCrossEntropy.is_correct(&[0.0, 2.0, 1.0], 1.0));
    }
}

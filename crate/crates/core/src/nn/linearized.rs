use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

use super::alpha::TrainConfig;
use super::loss::{check_batch, output_cotangents};
use super::mlp::{forward, jacobian_features, ModelState};

/// Init outputs and per-input Jacobians of the frozen initialization.
#[derive(Debug, Clone)]
struct FeatureCache {
    inputs: Matrix,
    init_outputs: Matrix,
    jacobians: Vec<Matrix>,
}

/// First-order Taylor model `f0(x) + J0(x)·δ` around a frozen initialization.
#[derive(Debug, Clone)]
pub struct LinearizedModel {
    frozen_init: ModelState,
    delta: Vec<f64>,
    cache: Option<FeatureCache>,
}

impl LinearizedModel {
    pub fn new(frozen_init: ModelState) -> Self {
        let p = frozen_init.param_count();
        LinearizedModel {
            frozen_init,
            delta: vec![0.0; p],
            cache: None,
        }
    }

    /// Precomputes the feature map on `inputs`; later calls on the same
    /// inputs reuse it.
    pub fn cache_features(&mut self, inputs: &Matrix) -> Result<()> {
        let init_outputs = forward(&self.frozen_init, inputs)?;
        let jacobians = inputs
            .iter_rows()
            .map(|x| jacobian_features(&self.frozen_init, x))
            .collect::<Result<Vec<_>>>()?;
        self.cache = Some(FeatureCache {
            inputs: inputs.clone(),
            init_outputs,
            jacobians,
        });
        Ok(())
    }

    pub fn frozen_init(&self) -> &ModelState {
        &self.frozen_init
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn set_delta(&mut self, delta: Vec<f64>) -> Result<()> {
        if delta.len() != self.frozen_init.param_count() {
            return Err(Error::Shape(format!(
                "delta has {} entries, model has {} parameters",
                delta.len(),
                self.frozen_init.param_count()
            )));
        }
        self.delta = delta;
        Ok(())
    }

    fn cached_for(&self, inputs: &Matrix) -> Option<&FeatureCache> {
        self.cache.as_ref().filter(|c| &c.inputs == inputs)
    }

    fn features(&self, inputs: &Matrix) -> Result<(Matrix, Vec<Matrix>)> {
        if let Some(c) = self.cached_for(inputs) {
            return Ok((c.init_outputs.clone(), c.jacobians.clone()));
        }
        let f0 = forward(&self.frozen_init, inputs)?;
        let jac = inputs
            .iter_rows()
            .map(|x| jacobian_features(&self.frozen_init, x))
            .collect::<Result<Vec<_>>>()?;
        Ok((f0, jac))
    }

    fn evaluate(&self, f0: &Matrix, jac: &[Matrix]) -> Matrix {
        let mut out = f0.clone();
        for (b, j) in jac.iter().enumerate() {
            for (o, v) in out.row_mut(b).iter_mut().enumerate() {
                *v += dot(j.row(o), &self.delta);
            }
        }
        out
    }

    /// Gradient step on δ with learning rate η (momentum ignored).
    /// Returns the mean loss before the update.
    pub fn train_step(&mut self, inputs: &Matrix, labels: &[f64], cfg: &TrainConfig, step: usize) -> Result<f64> {
        check_batch(inputs, labels)?;
        let (f0, jac) = self.features(inputs)?;
        let pred = self.evaluate(&f0, &jac);
        let n = labels.len() as f64;
        let (losses, seed) = output_cotangents(cfg.loss_kind, &pred, labels, 1.0 / n)?;
        let loss = losses.iter().sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        let mut grad = vec![0.0; self.delta.len()];
        for (b, j) in jac.iter().enumerate() {
            for (o, &s) in seed.row(b).iter().enumerate() {
                if s != 0.0 {
                    for (g, &jv) in grad.iter_mut().zip(j.row(o)) {
                        *g += s * jv;
                    }
                }
            }
        }
        for (d, g) in self.delta.iter_mut().zip(&grad) {
            *d -= cfg.learning_rate * g;
        }
        Ok(loss)
    }
}

pub fn linearized_predict(lm: &LinearizedModel, inputs: &Matrix) -> Result<Matrix> {
    let (f0, jac) = lm.features(inputs)?;
    Ok(lm.evaluate(&f0, &jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{init_mlp, MlpConfig};

    #[test]
    fn zero_delta_is_init_forward() {
        let init = init_mlp(&MlpConfig::relu(vec![2, 7, 7, 1], 4)).unwrap();
        let lm = LinearizedModel::new(init.clone());
        let x = Matrix::from_rows(&[[0.1, 0.9], [-0.4, 0.3]]).unwrap();
        assert_eq!(linearized_predict(&lm, &x).unwrap(), forward(&init, &x).unwrap());
    }

    #[test]
    fn single_layer_linearization_is_exact() {
        let init = init_mlp(&MlpConfig::relu(vec![3, 2], 4)).unwrap();
        let mut lm = LinearizedModel::new(init.clone());
        let delta: Vec<f64> = (0..init.param_count()).map(|i| 0.1 * i as f64 - 0.3).collect();
        lm.set_delta(delta.clone()).unwrap();
        let mut moved = init.clone();
        for (p, d) in moved.params_mut().iter_mut().zip(&delta) {
            *p += d;
        }
        let x = Matrix::from_rows(&[[0.1, 0.9, -1.0], [-0.4, 0.3, 2.0]]).unwrap();
        let a = linearized_predict(&lm, &x).unwrap();
        let b = forward(&moved, &x).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cache_does_not_change_predictions() {
        let init = init_mlp(&MlpConfig::relu(vec![2, 5, 1], 8)).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.9], [-0.4, 0.3]]).unwrap();
        let mut lm = LinearizedModel::new(init);
        lm.set_delta(vec![0.05; lm.delta().len()]).unwrap();
        let before = linearized_predict(&lm, &x).unwrap();
        lm.cache_features(&x).unwrap();
        assert_eq!(linearized_predict(&lm, &x).unwrap(), before);
    }

    #[test]
    fn set_delta_checks_length() {
        let init = init_mlp(&MlpConfig::relu(vec![2, 5, 1], 8)).unwrap();
        let mut lm = LinearizedModel::new(init);
        assert!(lm.set_delta(vec![0.0; 3]).is_err());
    }
}

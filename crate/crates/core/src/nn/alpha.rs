use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::loss::{check_batch, output_cotangents, LossKind};
use super::mlp::{backward, forward, forward_cached, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    Full,
    #[serde(untagged)]
    Size(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: BatchSize,
    pub loss_kind: LossKind,
    pub steps: usize,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    pub fn full_batch(learning_rate: f64, loss_kind: LossKind, steps: usize) -> Self {
        TrainConfig {
            learning_rate,
            momentum: 0.0,
            batch_size: BatchSize::Full,
            loss_kind,
            steps,
            shuffle_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.batch_size == BatchSize::Size(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Prediction `f0 + α (f − f0)` around a frozen copy of the initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaModel {
    current: ModelState,
    frozen_init: ModelState,
    alpha: f64,
}

impl AlphaModel {
    /// Starts at `init`; the frozen copy is taken here and never changes.
    pub fn new(init: ModelState, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(AlphaModel {
            frozen_init: init.clone(),
            current: init,
            alpha,
        })
    }

    /// Pairs an arbitrary current state with an initialization.
    pub fn with_current(current: ModelState, frozen_init: ModelState, alpha: f64) -> Result<Self> {
        if !current.same_topology(&frozen_init) {
            return Err(Error::Topology("current and frozen_init differ in topology".into()));
        }
        let mut am = AlphaModel::new(frozen_init, alpha)?;
        am.current = current;
        Ok(am)
    }

    pub fn current(&self) -> &ModelState {
        &self.current
    }

    pub fn current_mut(&mut self) -> &mut ModelState {
        &mut self.current
    }

    pub fn frozen_init(&self) -> &ModelState {
        &self.frozen_init
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn combine(alpha: f64, f: Matrix, f0: &Matrix) -> Matrix {
    if alpha == 1.0 {
        return f;
    }
    let mut out = f;
    for (o, &z) in out.as_mut_slice().iter_mut().zip(f0.as_slice()) {
        *o = z + alpha * (*o - z);
    }
    out
}

pub fn alpha_predict(am: &AlphaModel, inputs: &Matrix) -> Result<Matrix> {
    let f = forward(&am.current, inputs)?;
    if am.alpha == 1.0 {
        return Ok(f);
    }
    let f0 = forward(&am.frozen_init, inputs)?;
    Ok(combine(am.alpha, f, &f0))
}

/// One optimization batch. `init_outputs`, when present, must equal
/// `forward(frozen_init, inputs)`; it saves one forward pass per step.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub inputs: &'a Matrix,
    pub labels: &'a [f64],
    pub init_outputs: Option<&'a Matrix>,
}

impl<'a> Batch<'a> {
    pub fn new(inputs: &'a Matrix, labels: &'a [f64]) -> Self {
        Batch {
            inputs,
            labels,
            init_outputs: None,
        }
    }
}

/// Heavy-ball step on the α-scaled prediction: `v ← m·v + g`,
/// `θ ← θ − (η/α²)·v`. Returns the mean batch loss before the update.
pub fn train_step(
    am: &mut AlphaModel,
    batch: Batch<'_>,
    cfg: &TrainConfig,
    momentum_buffer: &mut Vec<f64>,
    step_index: usize,
) -> Result<f64> {
    if !(am.alpha > 0.0) {
        return Err(Error::Config(format!("training needs alpha > 0, got {}", am.alpha)));
    }
    check_batch(batch.inputs, batch.labels)?;
    let cache = forward_cached(&am.current, batch.inputs)?;
    let prediction = if am.alpha == 1.0 {
        cache.output().clone()
    } else {
        let owned;
        let f0 = match batch.init_outputs {
            Some(f0) => f0,
            None => {
                owned = forward(&am.frozen_init, batch.inputs)?;
                &owned
            }
        };
        combine(am.alpha, cache.output().clone(), f0)
    };
    let n = batch.labels.len() as f64;
    let (losses, seed) = output_cotangents(cfg.loss_kind, &prediction, batch.labels, am.alpha / n)?;
    let loss = losses.iter().sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::Diverged { step: step_index, loss });
    }
    let p = am.current.param_count();
    let mut grad = vec![0.0; p];
    backward(&am.current, &cache, &seed, &mut grad);
    if momentum_buffer.len() != p {
        momentum_buffer.clear();
        momentum_buffer.resize(p, 0.0);
    }
    let lr = cfg.learning_rate / (am.alpha * am.alpha);
    let m = cfg.momentum;
    for ((theta, v), g) in am
        .current
        .params_mut()
        .iter_mut()
        .zip(momentum_buffer.iter_mut())
        .zip(&grad)
    {
        *v = m * *v + g;
        *theta -= lr * *v;
    }
    if am.current.params().iter().any(|t| !t.is_finite()) {
        return Err(Error::Diverged {
            step: step_index,
            loss: f64::NAN,
        });
    }
    Ok(loss)
}

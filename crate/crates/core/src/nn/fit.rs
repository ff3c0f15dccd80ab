use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_for;

use super::alpha::{alpha_predict, train_step, AlphaModel, Batch, BatchSize, TrainConfig};
use super::loss::LossKind;

/// Deterministic batch order: full batch every step, or epochs of
/// seeded shuffles cut into consecutive chunks (the last chunk may be short).
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    size: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: BatchSize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("cannot sample batches from zero examples".into()));
        }
        let size = match batch_size {
            BatchSize::Full => n,
            BatchSize::Size(0) => return Err(Error::Config("batch_size must be >= 1".into())),
            BatchSize::Size(b) => b.min(n),
        };
        Ok(BatchSampler {
            n,
            size,
            seed,
            epoch: 0,
            order: (0..n).collect(),
            cursor: n,
        })
    }

    pub fn is_full(&self) -> bool {
        self.size == self.n
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.is_full() {
            return (0..self.n).collect();
        }
        if self.cursor >= self.n {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut rng_for(self.seed, self.epoch));
            self.epoch += 1;
            self.cursor = 0;
        }
        let end = (self.cursor + self.size).min(self.n);
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }
}

/// Runs `cfg.steps` training steps; returns the per-step batch losses.
pub fn fit(am: &mut AlphaModel, inputs: &Matrix, labels: &[f64], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut sampler = BatchSampler::new(labels.len(), cfg.batch_size, cfg.shuffle_seed)?;
    let mut momentum = Vec::new();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let loss = if sampler.is_full() {
            train_step(am, Batch::new(inputs, labels), cfg, &mut momentum, step)?
        } else {
            let idx = sampler.next_batch();
            let x = inputs.select_rows(&idx);
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            train_step(am, Batch::new(&x, &y), cfg, &mut momentum, step)?
        };
        losses.push(loss);
    }
    Ok(losses)
}

/// Per-example losses and correctness of the α-scaled predictions.
pub fn evaluate(am: &AlphaModel, inputs: &Matrix, labels: &[f64], kind: LossKind) -> Result<(Vec<f64>, Vec<bool>)> {
    let out = alpha_predict(am, inputs)?;
    per_example(&out, labels, kind)
}

pub fn per_example(outputs: &Matrix, labels: &[f64], kind: LossKind) -> Result<(Vec<f64>, Vec<bool>)> {
    if outputs.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} outputs for {} labels",
            outputs.rows(),
            labels.len()
        )));
    }
    let mut losses = Vec::with_capacity(labels.len());
    let mut correct = Vec::with_capacity(labels.len());
    for (row, &y) in outputs.iter_rows().zip(labels) {
        losses.push(kind.eval(row, y, None)?);
        correct.push(kind.is_correct(row, y));
    }
    Ok((losses, correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_mlp, MlpConfig};

    #[test]
    fn minibatches_cover_each_epoch_once() {
        let mut s = BatchSampler::new(10, BatchSize::Size(3), 5).unwrap();
        let mut seen: Vec<usize> = (0..4).flat_map(|_| s.next_batch()).collect();
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        let mut again = BatchSampler::new(10, BatchSize::Size(3), 5).unwrap();
        let mut s2 = BatchSampler::new(10, BatchSize::Size(3), 5).unwrap();
        for _ in 0..9 {
            assert_eq!(again.next_batch(), s2.next_batch());
        }
    }

    #[test]
    fn full_batch_fit_reduces_loss() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 0.5]]).unwrap();
        let y = [0.5, -0.5, 0.2, 1.0];
        let init = init_mlp(&MlpConfig::relu(vec![2, 16, 1], 2)).unwrap();
        let mut am = AlphaModel::new(init, 1.0).unwrap();
        let cfg = TrainConfig::full_batch(0.05, LossKind::Mse, 400);
        let losses = fit(&mut am, &x, &y, &cfg).unwrap();
        assert!(losses[399] < 0.1 * losses[0]);
        let (l, _) = evaluate(&am, &x, &y, LossKind::Mse).unwrap();
        assert_eq!(l.len(), 4);
    }
}

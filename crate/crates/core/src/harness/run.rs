use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{forward, init_mlp, per_example, train_step, AlphaModel, Batch, BatchSampler};
use crate::probes::{probe_report, select_probes};

use super::config::RunConfig;
use super::trace::{write_trace, Divergence, GroupedTrace, ProbeValues, TestMetrics, TraceRecord};

/// Model kept when the mean training loss first reached `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub threshold: f64,
    pub step: usize,
    pub model: AlphaModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: GroupedTrace,
    /// One entry per `snapshot_losses` level; `None` if never reached.
    pub snapshots: Vec<Option<Snapshot>>,
    pub final_model: AlphaModel,
}

/// Inputs with their frozen initial outputs, so α-scaled predictions need
/// one forward pass.
struct Evaluated {
    ds: Dataset,
    f0: Matrix,
}

impl Evaluated {
    fn new(ds: Dataset, am: &AlphaModel) -> Result<Self> {
        let f0 = forward(am.frozen_init(), &ds.inputs)?;
        Ok(Evaluated { ds, f0 })
    }

    fn predict(&self, am: &AlphaModel) -> Result<Matrix> {
        let mut f = forward(am.current(), &self.ds.inputs)?;
        let a = am.alpha();
        if a != 1.0 {
            for (o, &z) in f.as_mut_slice().iter_mut().zip(self.f0.as_slice()) {
                *o = z + a * (*o - z);
            }
        }
        Ok(f)
    }

    fn losses(&self, am: &AlphaModel, cfg: &RunConfig) -> Result<(Vec<f64>, Vec<bool>)> {
        per_example(&self.predict(am)?, &self.ds.labels, cfg.train.loss_kind)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

fn probe_due(step: usize, cfg: &RunConfig) -> bool {
    cfg.probe_every > 0 && step.is_multiple_of(cfg.probe_every)
}

fn record(
    step: usize,
    train: &Evaluated,
    test: Option<&Evaluated>,
    am: &AlphaModel,
    cfg: &RunConfig,
    probe_x: &Matrix,
) -> Result<TraceRecord> {
    let (loss, correct) = train.losses(am, cfg)?;
    let groups = train.ds.group_names.len();
    let mut group_loss = vec![None; groups];
    let mut group_acc = vec![None; groups];
    if step.is_multiple_of(cfg.group_metric_every) || step == cfg.train.steps {
        for g in 0..groups {
            let members = || (0..loss.len()).filter(move |&i| train.ds.group_of[i] == g);
            group_loss[g] = mean(members().map(|i| loss[i]));
            group_acc[g] = mean(members().map(|i| f64::from(u8::from(correct[i]))));
        }
    }
    let probe = if probe_due(step, cfg) {
        Some(ProbeValues::from(&probe_report(
            am.current(),
            am.frozen_init(),
            probe_x,
            step,
        )?))
    } else {
        None
    };
    let test = match test {
        Some(t) => {
            let (l, c) = t.losses(am, cfg)?;
            Some(TestMetrics {
                loss: mean(l.into_iter()).unwrap_or(f64::NAN),
                acc: mean(c.into_iter().map(|b| f64::from(u8::from(b)))).unwrap_or(f64::NAN),
            })
        }
        None => None,
    };
    Ok(TraceRecord {
        step,
        mean_train_loss: mean(loss.into_iter()).unwrap_or(f64::NAN),
        group_loss,
        group_acc,
        probe,
        test,
    })
}

fn take_snapshots(pending: &mut [Option<Snapshot>], thresholds: &[f64], loss: f64, step: usize, am: &AlphaModel) {
    for (slot, &t) in pending.iter_mut().zip(thresholds) {
        if slot.is_none() && loss <= t {
            *slot = Some(Snapshot {
                threshold: t,
                step,
                model: am.clone(),
            });
        }
    }
}

/// Trains one model and records its grouped trace. Divergence truncates
/// the trace and sets its `diverged` field rather than failing.
pub fn run_training(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let ds = cfg.dataset.build()?;
    if cfg.model.input_dim() != ds.dim() {
        return Err(Error::Config(format!(
            "model.layer_widths[0] = {} but the dataset has {} features",
            cfg.model.input_dim(),
            ds.dim()
        )));
    }
    let test_ds = cfg.test_set.as_ref().map(|s| s.build()).transpose()?;
    let mut am = AlphaModel::new(init_mlp(&cfg.model)?, cfg.alpha)?;
    let probe_x = ds
        .inputs
        .select_rows(&select_probes(ds.len(), cfg.probe_count.max(1), cfg.model.seed));
    let train = Evaluated::new(ds, &am)?;
    let test = test_ds.map(|d| Evaluated::new(d, &am)).transpose()?;

    let mut trace = GroupedTrace::new(train.ds.group_names.clone());
    trace.config = Some(cfg.clone());
    let mut snapshots: Vec<Option<Snapshot>> = vec![None; cfg.snapshot_losses.len()];
    let mut sampler = BatchSampler::new(train.ds.len(), cfg.train.batch_size, cfg.train.shuffle_seed)?;
    let mut momentum = Vec::new();
    let steps = cfg.train.steps;

    for step in 0..=steps {
        let due = step.is_multiple_of(cfg.group_metric_every) || probe_due(step, cfg) || step == steps;
        if due {
            let r = record(step, &train, test.as_ref(), &am, cfg, &probe_x)?;
            if !r.mean_train_loss.is_finite() {
                trace.diverged = Some(Divergence { step, loss: None });
                break;
            }
            take_snapshots(&mut snapshots, &cfg.snapshot_losses, r.mean_train_loss, step, &am);
            trace.push(r)?;
        }
        if step == steps {
            break;
        }
        let before = (sampler.is_full() && snapshots.iter().any(Option::is_none)).then(|| am.clone());
        let result = if sampler.is_full() {
            let batch = Batch {
                inputs: &train.ds.inputs,
                labels: &train.ds.labels,
                init_outputs: Some(&train.f0),
            };
            train_step(&mut am, batch, &cfg.train, &mut momentum, step)
        } else {
            let idx = sampler.next_batch();
            let x = train.ds.inputs.select_rows(&idx);
            let y: Vec<f64> = idx.iter().map(|&i| train.ds.labels[i]).collect();
            let f0 = train.f0.select_rows(&idx);
            let batch = Batch {
                inputs: &x,
                labels: &y,
                init_outputs: Some(&f0),
            };
            train_step(&mut am, batch, &cfg.train, &mut momentum, step)
        };
        match result {
            Ok(loss) => {
                // a full batch reports the exact training loss before the update
                if let Some(prev) = before {
                    take_snapshots(&mut snapshots, &cfg.snapshot_losses, loss, step, &prev);
                }
            }
            Err(Error::Diverged { step, loss }) => {
                log::warn!("run diverged at step {step}");
                trace.diverged = Some(Divergence {
                    step,
                    loss: loss.is_finite().then_some(loss),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(path) = &cfg.output {
        write_trace(&trace, path)?;
    }
    Ok(RunOutput {
        trace,
        snapshots,
        final_model: am,
    })
}

/// Runs independent configurations on at most `jobs` threads; results come
/// back in input order.
pub fn run_many(cfgs: &[RunConfig], jobs: usize) -> Result<Vec<Result<RunOutput>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cfgs.par_iter().map(run_training).collect()))
}

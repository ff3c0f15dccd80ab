//! Pointwise loss differences between two models over a 2-d grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::yinyang::{self, grid};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{alpha_predict, per_example, AlphaModel, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub resolution: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: 50,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

/// Row-major grid (x fastest) with one loss difference per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLossMap {
    pub spec: GridSpec,
    pub points: Vec<[f64; 2]>,
    pub delta: Vec<f64>,
}

impl DeltaLossMap {
    /// Mean Δloss over the points selected by `keep`; `None` if none are.
    pub fn mean_where<F: Fn([f64; 2]) -> bool>(&self, keep: F) -> Option<f64> {
        let (sum, count) = self
            .points
            .iter()
            .zip(&self.delta)
            .filter(|(p, _)| keep(**p))
            .fold((0.0, 0usize), |(s, c), (_, d)| (s + d, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean over points farther than `margin` from the class boundary.
    pub fn easy_mean(&self, margin: f64) -> Option<f64> {
        self.mean_where(|p| yinyang::boundary_distance(p) > margin)
    }

    /// Mean over the two eye disks.
    pub fn eye_mean(&self) -> Option<f64> {
        self.mean_where(yinyang::in_eye)
    }

    /// CSV `x,y,delta`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wr = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["x", "y", "delta"]).map_err(wr)?;
        for (p, d) in self.points.iter().zip(&self.delta) {
            w.write_record([format!("{:.16e}", p[0]), format!("{:.16e}", p[1]), format!("{d:.16e}")])
                .map_err(wr)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}

/// `loss(nonlinear) − loss(linear)` per grid point, against the yin-yang
/// label of that point.
pub fn delta_loss_map(
    model_nl: &AlphaModel,
    model_lin: &AlphaModel,
    spec: &GridSpec,
    kind: LossKind,
) -> Result<DeltaLossMap> {
    for m in [model_nl, model_lin] {
        let d = m.current().topology().input_dim();
        if d != 2 {
            return Err(Error::Shape(format!("delta-loss maps need 2-input models, got {d}")));
        }
    }
    if spec.resolution == 0 || !(spec.lo < spec.hi) {
        return Err(Error::Config("grid needs resolution >= 1 and lo < hi".into()));
    }
    let points = grid(spec.resolution, spec.lo, spec.hi);
    let inputs = Matrix::from_rows(&points)?;
    let labels: Vec<f64> = points.iter().map(|&p| yinyang::label(p)).collect();
    let (nl, _) = per_example(&alpha_predict(model_nl, &inputs)?, &labels, kind)?;
    let (lin, _) = per_example(&alpha_predict(model_lin, &inputs)?, &labels, kind)?;
    Ok(DeltaLossMap {
        spec: *spec,
        points,
        delta: nl.iter().zip(&lin).map(|(a, b)| a - b).collect(),
    })
}

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::dynamics::{closed_form, ModeTrajectory, Regime};
use super::problem::QuadraticProblem;

/// Mean per-example loss `½ (f(x_i) − y_i)²` of each group over time.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCurves {
    pub times: Vec<f64>,
    pub group_names: Vec<String>,
    pub regime: Regime,
    /// `times.len() x group_names.len()`.
    pub losses: Matrix,
}

impl GroupCurves {
    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn curve(&self, group: usize) -> Vec<f64> {
        (0..self.times.len()).map(|i| self.losses.get(i, group)).collect()
    }

    /// First time the group's loss is at most `fraction` of its initial
    /// value, linearly interpolated between samples.
    pub fn crossing_time(&self, group: usize, fraction: f64) -> Option<f64> {
        let curve = self.curve(group);
        let target = fraction * curve[0];
        if curve[0] <= target {
            return Some(self.times[0]);
        }
        for i in 1..curve.len() {
            if curve[i] <= target {
                let (a, b) = (curve[i - 1], curve[i]);
                let w = if a == b { 1.0 } else { (a - target) / (a - b) };
                return Some(self.times[i - 1] + w * (self.times[i] - self.times[i - 1]));
            }
        }
        None
    }

    /// Wide CSV: `time,loss:<group>,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.group_names.iter().map(|g| format!("loss:{g}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(self.losses.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Per-group loss curves of the closed-form dynamics. `group_of[i]` indexes
/// into `group_names`.
pub fn example_trace(
    problem: &QuadraticProblem,
    times: &[f64],
    regime: Regime,
    group_of: &[usize],
    group_names: &[String],
) -> Result<GroupCurves> {
    let traj = closed_form(problem, times, regime)?;
    group_losses(problem, &traj, group_of, group_names)
}

/// Per-group loss curves of any mode trajectory of `problem`.
pub fn group_losses(
    problem: &QuadraticProblem,
    traj: &ModeTrajectory,
    group_of: &[usize],
    group_names: &[String],
) -> Result<GroupCurves> {
    let n = problem.n();
    if group_of.len() != n {
        return Err(Error::Shape(format!("{} group ids for {n} examples", group_of.len())));
    }
    let g = group_names.len();
    if let Some(&bad) = group_of.iter().find(|&&k| k >= g) {
        return Err(Error::Shape(format!("group id {bad} out of range ({g} groups)")));
    }
    let mut counts = vec![0usize; g];
    group_of.iter().for_each(|&k| counts[k] += 1);
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Shape(format!("group {} has no examples", group_names[empty])));
    }
    let a = problem.inputs_in_mode_basis();
    let y = problem.labels();
    let mut losses = Matrix::zeros(traj.times.len(), g);
    for i in 0..traj.times.len() {
        let modes = nalgebra::DVector::from_column_slice(traj.at(i));
        let pred = &a * modes;
        let row = losses.row_mut(i);
        for (e, &k) in group_of.iter().enumerate() {
            let r = pred[e] - y[e];
            row[k] += 0.5 * r * r;
        }
        for (v, &c) in row.iter_mut().zip(&counts) {
            *v /= c as f64;
        }
    }
    Ok(GroupCurves {
        times: traj.times.clone(),
        group_names: group_names.to_vec(),
        regime: traj.regime,
        losses,
    })
}

/// Long CSV of a trajectory: `time,mode,value,regime,source`.
pub fn write_trajectory_csv<W: Write>(traj: &ModeTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "mode", "value", "regime", "source"])
        .map_err(csv_err)?;
    for (i, t) in traj.times.iter().enumerate() {
        for (k, v) in traj.at(i).iter().enumerate() {
            w.write_record([
                format!("{t:.16e}"),
                k.to_string(),
                format!("{v:.16e}"),
                traj.regime.name().to_string(),
                traj.source.name().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Log-spaced sample times on `[0, t_end]`, starting with 0.
pub fn log_time_grid(t_first: f64, t_end: f64, points: usize) -> Vec<f64> {
    let mut times = vec![0.0];
    let (a, b) = (t_first.ln(), t_end.ln());
    for i in 0..points {
        let s = if points == 1 {
            1.0
        } else {
            i as f64 / (points - 1) as f64
        };
        times.push((a + s * (b - a)).exp());
    }
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::build_problem;

    fn example1() -> (QuadraticProblem, Vec<usize>, Vec<String>) {
        // μ = (4, 1): x₁ = (2, 0), x₂ = (0, 1), y = (1/2, 4)
        let x = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let sigma: f64 = 1e-4;
        let w0 = vec![(2.0 * sigma).sqrt(); 2];
        let p = build_problem(&x, &[0.5, 4.0], &w0).unwrap();
        (p, vec![0, 1], vec!["example1".into(), "example2".into()])
    }

    #[test]
    fn initial_losses_are_half_label_squares() {
        let (p, g, names) = example1();
        let curves = example_trace(&p, &[0.0], Regime::Nonlinear, &g, &names).unwrap();
        assert!((curves.losses.get(0, 0) - 0.125).abs() < 1e-3);
        assert!((curves.losses.get(0, 1) - 8.0).abs() < 1e-3);
    }

    #[test]
    fn losses_vanish_at_infinity() {
        let (p, g, names) = example1();
        for regime in [Regime::Nonlinear, Regime::Linearized] {
            let curves = example_trace(&p, &[0.0, f64::INFINITY], regime, &g, &names).unwrap();
            assert!(curves.losses.row(1).iter().all(|&v| v < 1e-20));
        }
    }

    #[test]
    fn learning_order_flips_between_regimes() {
        let (p, g, names) = example1();
        let nl = example_trace(&p, &log_time_grid(1e-3, 1e2, 2000), Regime::Nonlinear, &g, &names).unwrap();
        let lin = example_trace(&p, &log_time_grid(1e-1, 1e7, 2000), Regime::Linearized, &g, &names).unwrap();
        let (a, b) = (nl.crossing_time(0, 0.5).unwrap(), nl.crossing_time(1, 0.5).unwrap());
        assert!(b < a, "nonlinear learns example 2 first: {a} vs {b}");
        let (a, b) = (lin.crossing_time(0, 0.5).unwrap(), lin.crossing_time(1, 0.5).unwrap());
        assert!(a < b, "linearized learns example 1 first: {a} vs {b}");
    }

    #[test]
    fn crossing_interpolates() {
        let curves = GroupCurves {
            times: vec![0.0, 1.0, 2.0],
            group_names: vec!["g".into()],
            regime: Regime::Nonlinear,
            losses: Matrix::from_vec(3, 1, vec![4.0, 3.0, 1.0]).unwrap(),
        };
        assert_eq!(curves.crossing_time(0, 0.5), Some(1.5));
        assert_eq!(curves.crossing_time(0, 0.1), None);
    }

    #[test]
    fn rejects_bad_grouping() {
        let (p, _, names) = example1();
        assert!(example_trace(&p, &[0.0], Regime::Nonlinear, &[0], &names).is_err());
        assert!(example_trace(&p, &[0.0], Regime::Nonlinear, &[0, 0], &names).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let (p, _, _) = example1();
        let traj = closed_form(&p, &[0.0, 1.0], Regime::Linearized).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,mode,value,regime,source");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(",linearized,closed_form"));
    }
}

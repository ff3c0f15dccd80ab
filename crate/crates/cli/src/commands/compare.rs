use std::path::Path;

use serde::{Deserialize, Serialize};

use lazylab::harness::{align_by_progress, default_thresholds, read_trace, GroupedTrace, ProgressPoint};

use crate::{num, opt_num, write_rows, CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Explicit loss levels; when empty, `count` log-spaced levels are used.
    pub thresholds: Vec<f64>,
    pub count: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            thresholds: Vec::new(),
            count: 8,
        }
    }
}

fn endpoints(t: &GroupedTrace, path: &Path) -> Result<(f64, f64), CliError> {
    match (t.records.first(), t.records.last()) {
        (Some(a), Some(b)) => Ok((a.mean_train_loss, b.mean_train_loss)),
        _ => Err(CliError::Config(format!("{} has no records", path.display()))),
    }
}

fn point_cells(p: &Option<ProgressPoint>, groups: usize) -> Vec<String> {
    let mut cells = vec![opt_num(p.as_ref().map(|p| p.step))];
    for g in 0..groups {
        cells.push(opt_num(p.as_ref().and_then(|p| p.group_loss[g])));
        cells.push(opt_num(p.as_ref().and_then(|p| p.group_acc[g])));
    }
    cells
}

pub fn run(ctx: &Context, a_path: &Path, b_path: &Path) -> Result<(), CliError> {
    let cfg: CompareConfig = ctx.load()?;
    ctx.echo(&cfg)?;
    let a = read_trace(a_path).map_err(|e| CliError::Config(format!("{}: {e}", a_path.display())))?;
    let b = read_trace(b_path).map_err(|e| CliError::Config(format!("{}: {e}", b_path.display())))?;
    let thresholds = if cfg.thresholds.is_empty() {
        let (a0, a1) = endpoints(&a, a_path)?;
        let (b0, b1) = endpoints(&b, b_path)?;
        // levels both runs pass through
        default_thresholds(a0.min(b0), a1.max(b1), cfg.count)?
    } else {
        cfg.thresholds.clone()
    };
    let pairs = align_by_progress(&a, &b, &thresholds)?;

    let mut header = vec!["threshold".to_string(), "step_a".to_string()];
    for g in &a.group_names {
        header.push(format!("a:loss:{g}"));
        header.push(format!("a:acc:{g}"));
    }
    header.push("step_b".into());
    for g in &b.group_names {
        header.push(format!("b:loss:{g}"));
        header.push(format!("b:acc:{g}"));
    }
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| {
            let mut row = vec![num(p.threshold)];
            row.extend(point_cells(&p.a, a.group_names.len()));
            row.extend(point_cells(&p.b, b.group_names.len()));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&ctx.path("aligned.csv"), &header, &rows)?;
    for p in &pairs {
        let step = |x: &Option<ProgressPoint>| {
            x.as_ref()
                .map(|x| format!("{:.1}", x.step))
                .unwrap_or_else(|| "-".into())
        };
        println!("loss {:.4}: step {} vs {}", p.threshold, step(&p.a), step(&p.b));
    }
    Ok(())
}

//! Per-run training records and their CSV/JSON persistence.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probes::ProbeReport;

use super::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeValues {
    pub sign: f64,
    pub ntk: f64,
    pub repr: f64,
}

impl From<&ProbeReport> for ProbeValues {
    fn from(r: &ProbeReport) -> Self {
        ProbeValues {
            sign: r.sign_similarity,
            ntk: r.ntk_alignment,
            repr: r.representation_alignment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub loss: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub mean_train_loss: f64,
    /// Indexed like [`GroupedTrace::group_names`]; `None` when not sampled.
    pub group_loss: Vec<Option<f64>>,
    pub group_acc: Vec<Option<f64>>,
    pub probe: Option<ProbeValues>,
    pub test: Option<TestMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: usize,
    /// Last loss seen; `None` when it was not finite.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedTrace {
    pub config: Option<RunConfig>,
    pub group_names: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub diverged: Option<Divergence>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: Option<RunConfig>,
    group_names: Vec<String>,
    diverged: Option<Divergence>,
}

impl GroupedTrace {
    pub fn new(group_names: Vec<String>) -> Self {
        GroupedTrace {
            config: None,
            group_names,
            records: Vec::new(),
            diverged: None,
        }
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if record.group_loss.len() != self.group_names.len() || record.group_acc.len() != self.group_names.len() {
            return Err(Error::Shape("record group count differs from trace".into()));
        }
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::Format(format!("step {} after step {}", record.step, last.step)));
            }
        }
        if !record.mean_train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "mean_train_loss at step {} is not finite",
                record.step
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.mean_train_loss)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string(), "mean_train_loss".to_string()];
        for g in &self.group_names {
            h.push(format!("group:{g}:loss"));
            h.push(format!("group:{g}:acc"));
        }
        h.extend(["probe:sign", "probe:ntk", "probe:repr", "test:loss", "test:acc"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        let wr = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(self.header()).map_err(wr)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), fmt(Some(r.mean_train_loss))];
            for (l, a) in r.group_loss.iter().zip(&r.group_acc) {
                row.push(fmt(*l));
                row.push(fmt(*a));
            }
            row.push(fmt(r.probe.map(|p| p.sign)));
            row.push(fmt(r.probe.map(|p| p.ntk)));
            row.push(fmt(r.probe.map(|p| p.repr)));
            row.push(fmt(r.test.map(|t| t.loss)));
            row.push(fmt(r.test.map(|t| t.acc)));
            w.write_record(&row).map_err(wr)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    /// Parses the CSV form. Config and divergence live in the sidecar and
    /// are left empty here.
    pub fn parse_csv<R: Read>(input: R) -> Result<GroupedTrace> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = rd.records();
        let header = match rows.next() {
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
            Some(h) => h.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
        };
        let cols: HashMap<&str, usize> = header.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let col = |name: &str| {
            cols.get(name).copied().ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column {name}"),
            })
        };
        let mut group_names = Vec::new();
        for c in header.iter() {
            if let Some(g) = c.strip_prefix("group:").and_then(|r| r.strip_suffix(":loss")) {
                group_names.push(g.to_string());
            }
        }
        let step_col = col("step")?;
        let loss_col = col("mean_train_loss")?;
        let group_cols = group_names
            .iter()
            .map(|g| Ok((col(&format!("group:{g}:loss"))?, col(&format!("group:{g}:acc"))?)))
            .collect::<Result<Vec<_>>>()?;
        let probe_cols = [col("probe:sign")?, col("probe:ntk")?, col("probe:repr")?];
        let test_cols = [col("test:loss")?, col("test:acc")?];

        let mut trace = GroupedTrace::new(group_names);
        for (k, row) in rows.enumerate() {
            let line = k + 2;
            let row = row.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if row.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", header.len(), row.len()),
                });
            }
            let opt = |c: usize| -> Result<Option<f64>> {
                let s = &row[c];
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Parse {
                    line,
                    message: format!("column {}: not a number: {s:?}", &header[c]),
                })
            };
            let step: usize = row[step_col].parse().map_err(|_| Error::Parse {
                line,
                message: format!("column step: not an integer: {:?}", &row[step_col]),
            })?;
            let mean_train_loss = opt(loss_col)?.ok_or_else(|| Error::Parse {
                line,
                message: "column mean_train_loss is blank".into(),
            })?;
            let mut group_loss = Vec::with_capacity(group_cols.len());
            let mut group_acc = Vec::with_capacity(group_cols.len());
            for &(l, a) in &group_cols {
                group_loss.push(opt(l)?);
                group_acc.push(opt(a)?);
            }
            let p = [opt(probe_cols[0])?, opt(probe_cols[1])?, opt(probe_cols[2])?];
            let probe = match p {
                [Some(sign), Some(ntk), Some(repr)] => Some(ProbeValues { sign, ntk, repr }),
                [None, None, None] => None,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: "probe columns must be all set or all blank".into(),
                    })
                }
            };
            let test = match (opt(test_cols[0])?, opt(test_cols[1])?) {
                (Some(loss), Some(acc)) => Some(TestMetrics { loss, acc }),
                (None, None) => None,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: "test columns must be both set or both blank".into(),
                    })
                }
            };
            trace
                .push(TraceRecord {
                    step,
                    mean_train_loss,
                    group_loss,
                    group_acc,
                    probe,
                    test,
                })
                .map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
        }
        Ok(trace)
    }
}

/// `trace.json` next to `trace.csv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the CSV at `path` and the JSON sidecar beside it.
pub fn write_trace(trace: &GroupedTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&Sidecar {
        config: trace.config.clone(),
        group_names: trace.group_names.clone(),
        diverged: trace.diverged,
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Reads a trace CSV and, when present, its sidecar.
pub fn read_trace(path: &Path) -> Result<GroupedTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut trace = GroupedTrace::parse_csv(std::io::BufReader::new(file))?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let s: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
        if !trace.records.is_empty() && s.group_names != trace.group_names {
            return Err(Error::Format(format!(
                "{}: group names disagree with the CSV header",
                side.display()
            )));
        }
        trace.group_names = s.group_names;
        trace.config = s.config;
        trace.diverged = s.diverged;
    }
    Ok(trace)
}

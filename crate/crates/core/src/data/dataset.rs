use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Labels before noise injection, when noise was applied.
    pub original_labels: Option<Vec<f64>>,
}

/// Inputs, labels, and a partition of the examples into named groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    /// Real targets, or class indices when `num_classes` is set.
    pub labels: Vec<f64>,
    pub num_classes: Option<usize>,
    pub group_of: Vec<usize>,
    pub group_names: Vec<String>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(
        inputs: Matrix,
        labels: Vec<f64>,
        num_classes: Option<usize>,
        group_of: Vec<usize>,
        group_names: Vec<String>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let n = inputs.rows();
        if n == 0 {
            return Err(Error::Shape("dataset has no examples".into()));
        }
        if labels.len() != n || group_of.len() != n {
            return Err(Error::Shape(format!(
                "{n} inputs, {} labels, {} group ids",
                labels.len(),
                group_of.len()
            )));
        }
        if let Some(&g) = group_of.iter().find(|&&g| g >= group_names.len()) {
            return Err(Error::Shape(format!("group id {g} has no name")));
        }
        if let Some(k) = num_classes {
            if let Some(l) = labels.iter().find(|&&l| l < 0.0 || l.fract() != 0.0 || l as usize >= k) {
                return Err(Error::Shape(format!("label {l} is not a class below {k}")));
            }
        }
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
            group_of,
            group_names,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.group_of[i] == group).collect()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.group_names.len()];
        self.group_of.iter().for_each(|&g| sizes[g] += 1);
        sizes
    }

    /// Examples at `idx`, keeping group names and metadata.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            group_of: idx.iter().map(|&i| self.group_of[i]).collect(),
            group_names: self.group_names.clone(),
            meta: self.meta.clone(),
        }
    }

    /// CSV `x0,..,x{d-1},label,group`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        header.push("group".into());
        w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.inputs.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            row.push(format!("{}", self.labels[i]));
            row.push(self.group_names[self.group_of[i]].clone());
            w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}

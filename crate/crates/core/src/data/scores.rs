use std::path::Path;

use crate::error::{Error, Result};

use super::dataset::Dataset;

/// One finite decimal per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_scores(text: &str) -> Result<Vec<f64>> {
    let mut scores = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: {t:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("score must be finite, got {t}"),
            });
        }
        scores.push(v);
    }
    Ok(scores)
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

/// Quantile bin of each example, 0 for the lowest scores. Ranks are taken
/// in ascending score with ties broken by index; rank `r` of `n` lands in
/// bin `⌊r·n_bins/n⌋`.
pub fn quantile_bins(scores: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be >= 1".into()));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut bins = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = rank * n_bins / n;
    }
    Ok(bins)
}

/// Regroups `ds` into `n_bins` score quantiles named `q0`, `q1`, ….
pub fn load_scores_and_group(ds: &Dataset, scores: &[f64], n_bins: usize) -> Result<Dataset> {
    if scores.len() != ds.len() {
        return Err(Error::Format(format!(
            "score file has {} entries for {} examples",
            scores.len(),
            ds.len()
        )));
    }
    let mut out = ds.clone();
    out.group_of = quantile_bins(scores, n_bins)?;
    out.group_names = (0..n_bins).map(|b| format!("q{b}")).collect();
    Ok(out)
}

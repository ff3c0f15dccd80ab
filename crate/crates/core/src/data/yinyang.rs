//! Binary yin-yang classification on `[−1, 1]²`.
//!
//! Geometry: the unit disk is split by two half-circles of radius ½
//! centred at `(0, ±½)`. The class-1 region is the upper small disk plus
//! the right half of the unit disk outside the lower small disk. Each small
//! disk carries an eye of radius [`EYE_RADIUS`] with the opposite label.
//! Outside the unit disk a point takes the label of the rim point in its
//! direction, which reduces to the sign of `x`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::rng::rng_for;

use super::dataset::{Dataset, DatasetMeta};

pub const EYE_RADIUS: f64 = 0.15;
pub const LOBE_RADIUS: f64 = 0.5;
pub const EYE_CENTERS: [[f64; 2]; 2] = [[0.0, 0.5], [0.0, -0.5]];

pub const EASY: usize = 0;
pub const HARD: usize = 1;

fn dist(p: [f64; 2], c: [f64; 2]) -> f64 {
    (p[0] - c[0]).hypot(p[1] - c[1])
}

pub fn label(p: [f64; 2]) -> f64 {
    let [top, bottom] = EYE_CENTERS;
    if dist(p, top) < EYE_RADIUS {
        return 0.0;
    }
    if dist(p, bottom) < EYE_RADIUS {
        return 1.0;
    }
    if p[0].hypot(p[1]) > 1.0 {
        return if p[0] > 0.0 { 1.0 } else { 0.0 };
    }
    // upper lobe, or the right half outside the lower lobe
    let upper = dist(p, top) < LOBE_RADIUS;
    let right = p[0] > 0.0 && dist(p, bottom) >= LOBE_RADIUS;
    if upper || right {
        1.0
    } else {
        0.0
    }
}

/// Inside one of the two eye disks.
pub fn in_eye(p: [f64; 2]) -> bool {
    EYE_CENTERS.iter().any(|&c| dist(p, c) < EYE_RADIUS)
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Distance to a half circle of radius ½ around `c`, keeping the side where
/// `sign · (x − c_x) ≥ 0`.
fn dist_to_half_arc(p: [f64; 2], c: [f64; 2], sign: f64) -> f64 {
    if sign * (p[0] - c[0]) >= 0.0 {
        (dist(p, c) - LOBE_RADIUS).abs()
    } else {
        let ends = [[c[0], c[1] + LOBE_RADIUS], [c[0], c[1] - LOBE_RADIUS]];
        dist(p, ends[0]).min(dist(p, ends[1]))
    }
}

/// Euclidean distance to the class boundary.
pub fn boundary_distance(p: [f64; 2]) -> f64 {
    let [top, bottom] = EYE_CENTERS;
    let far = 1e6;
    [
        (dist(p, top) - EYE_RADIUS).abs(),
        (dist(p, bottom) - EYE_RADIUS).abs(),
        // S-curve: left half of the upper circle, right half of the lower one
        dist_to_half_arc(p, top, -1.0),
        dist_to_half_arc(p, bottom, 1.0),
        // vertical rays outside the unit disk
        dist_to_segment(p, [0.0, 1.0], [0.0, far]),
        dist_to_segment(p, [0.0, -1.0], [0.0, -far]),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// `n` points uniform on `[−1, 1]²`; groups `easy` (farther than `margin`
/// from the boundary) and `hard`.
pub fn yin_yang(n: usize, seed: u64, margin: f64) -> Result<Dataset> {
    let mut rng = rng_for(seed, 0x717);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        rows.push([rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]);
    }
    let inputs = Matrix::from_rows(&rows)?;
    let labels = rows.iter().map(|&p| label(p)).collect();
    let group_of = rows
        .iter()
        .map(|&p| if boundary_distance(p) > margin { EASY } else { HARD })
        .collect();
    let mut params = BTreeMap::new();
    params.insert("n".into(), n.to_string());
    params.insert("margin".into(), margin.to_string());
    Dataset::new(
        inputs,
        labels,
        Some(2),
        group_of,
        vec!["easy".into(), "hard".into()],
        DatasetMeta {
            generator: "yin_yang".into(),
            params,
            seed: Some(seed),
            original_labels: None,
        },
    )
}

/// Row-major grid of `resolution²` points spanning `[lo, hi]²` inclusive;
/// x varies fastest.
pub fn grid(resolution: usize, lo: f64, hi: f64) -> Vec<[f64; 2]> {
    let step = if resolution > 1 {
        (hi - lo) / (resolution - 1) as f64
    } else {
        0.0
    };
    let mut pts = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        for ix in 0..resolution {
            pts.push([lo + ix as f64 * step, lo + iy as f64 * step]);
        }
    }
    pts
}

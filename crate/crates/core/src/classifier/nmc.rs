//! Nearest-mean classification over a prototype table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::Distance;
use crate::error::{Error, Result};
use crate::prototype::PrototypeTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_label: u32,
    pub distance: f64,
    /// Distance to each prototype in ascending label order, when requested.
    pub per_class_distances: Option<Vec<f64>>,
}

fn check_query(x: &[f32], dim: usize, index: u64) -> Result<Vec<f64>> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    if let Some(coordinate) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            record: index,
            coordinate,
        });
    }
    Ok(x.iter().map(|&v| v as f64).collect())
}

/// Picks the smallest distance; on ties the earlier (smaller) label wins.
fn argmin(dists: impl Iterator<Item = (u32, f64)>) -> (u32, f64) {
    let mut best = (u32::MAX, f64::INFINITY);
    let mut first = true;
    for (label, d) in dists {
        if first || d < best.1 {
            best = (label, d);
            first = false;
        }
    }
    best
}

fn predict_inner(x: &[f32], table: &PrototypeTable, metric: &dyn Distance, detailed: bool) -> Result<Prediction> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let q = check_query(x, table.dim(), 0)?;
    let dists: Vec<(u32, f64)> = table
        .iter()
        .map(|p| (p.class_label, metric.distance(&q, &p.mean)))
        .collect();
    let (class_label, distance) = argmin(dists.iter().copied());
    Ok(Prediction {
        class_label,
        distance,
        per_class_distances: detailed.then(|| dists.into_iter().map(|(_, d)| d).collect()),
    })
}

/// Classifies one query with the plain scalar kernel.
pub fn predict(x: &[f32], table: &PrototypeTable, metric: &dyn Distance) -> Result<Prediction> {
    predict_inner(x, table, metric, false)
}

/// As [`predict`], also returning the distance to every prototype.
pub fn predict_detailed(x: &[f32], table: &PrototypeTable, metric: &dyn Distance) -> Result<Prediction> {
    predict_inner(x, table, metric, true)
}

/// Prototype means packed row-major for the batch kernel.
#[derive(Debug, Clone)]
pub struct PackedPrototypes {
    dim: usize,
    labels: Vec<u32>,
    means: Vec<f64>,
}

impl PackedPrototypes {
    pub fn new(table: &PrototypeTable) -> Self {
        let mut means = Vec::with_capacity(table.len() * table.dim());
        let mut labels = Vec::with_capacity(table.len());
        for p in table.iter() {
            labels.push(p.class_label);
            means.extend_from_slice(&p.mean);
        }
        Self {
            dim: table.dim(),
            labels,
            means,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn nearest(&self, q: &[f64], metric: &dyn Distance) -> Prediction {
        let dists = self
            .labels
            .iter()
            .zip(self.means.chunks_exact(self.dim))
            .map(|(&label, mean)| (label, metric.distance_fast(q, mean)));
        let (class_label, distance) = argmin(dists);
        Prediction {
            class_label,
            distance,
            per_class_distances: None,
        }
    }

    /// Classifies every query in parallel. All queries are checked before
    /// any work starts, so an error means nothing was computed.
    pub fn predict_batch<Q>(&self, queries: &[Q], metric: &dyn Distance) -> Result<Vec<Prediction>>
    where
        Q: AsRef<[f32]> + Sync,
    {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        for (i, q) in queries.iter().enumerate() {
            let q = q.as_ref();
            if q.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: q.len(),
                });
            }
            if let Some(coordinate) = q.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    record: i as u64,
                    coordinate,
                });
            }
        }
        Ok(queries
            .par_iter()
            .map_init(
                || vec![0.0f64; self.dim],
                |buf, q| {
                    for (b, &v) in buf.iter_mut().zip(q.as_ref()) {
                        *b = v as f64;
                    }
                    self.nearest(buf, metric)
                },
            )
            .collect())
    }
}

/// Classifies a batch with the packed, lane-parallel kernel.
pub fn predict_batch<Q>(queries: &[Q], table: &PrototypeTable, metric: &dyn Distance) -> Result<Vec<Prediction>>
where
    Q: AsRef<[f32]> + Sync,
{
    PackedPrototypes::new(table).predict_batch(queries, metric)
}

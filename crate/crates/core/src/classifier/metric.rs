//! Distance kernels, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A distance between a query and a class mean, both in `f64`.
///
/// `distance` is the plain sequential definition. `distance_fast` may
/// reorder the arithmetic for throughput; it must agree with `distance`
/// to within rounding.
pub trait Distance: Send + Sync {
    fn name(&self) -> &'static str;

    fn distance(&self, query: &[f64], mean: &[f64]) -> f64;

    fn distance_fast(&self, query: &[f64], mean: &[f64]) -> f64 {
        self.distance(query, mean)
    }
}

const LANES: usize = 8;

/// Sum of squared differences with independent lane accumulators, which the
/// compiler turns into packed SIMD.
#[inline]
pub fn squared_l2_lanes(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    acc.iter().sum::<f64>() + tail
}

/// `(a·b, |a|², |b|²)` in one pass.
#[inline]
pub fn dot_and_norms_lanes(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = ([0.0f64; LANES], [0.0f64; LANES], [0.0f64; LANES]);
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            dot[l] += x[l] * y[l];
            na[l] += x[l] * x[l];
            nb[l] += y[l] * y[l];
        }
    }
    let (mut td, mut ta, mut tb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(rb) {
        td += x * y;
        ta += x * x;
        tb += y * y;
    }
    (
        dot.iter().sum::<f64>() + td,
        na.iter().sum::<f64>() + ta,
        nb.iter().sum::<f64>() + tb,
    )
}

fn squared_l2_plain(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `1 - cos(a, b)`, clamped to `[0, 2]`. A zero vector has cosine 0 with
/// everything.
fn cosine_from_parts(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredEuclidean;

impl Distance for SquaredEuclidean {
    fn name(&self) -> &'static str {
        "squared_euclidean"
    }
    fn distance(&self, q: &[f64], m: &[f64]) -> f64 {
        squared_l2_plain(q, m)
    }
    fn distance_fast(&self, q: &[f64], m: &[f64]) -> f64 {
        squared_l2_lanes(q, m)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Distance for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }
    fn distance(&self, q: &[f64], m: &[f64]) -> f64 {
        squared_l2_plain(q, m).sqrt()
    }
    fn distance_fast(&self, q: &[f64], m: &[f64]) -> f64 {
        squared_l2_lanes(q, m).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CosineDistance;

impl Distance for CosineDistance {
    fn name(&self) -> &'static str {
        "cosine_distance"
    }
    fn distance(&self, q: &[f64], m: &[f64]) -> f64 {
        let dot = q.iter().zip(m).map(|(x, y)| x * y).sum();
        let nq = q.iter().map(|x| x * x).sum();
        let nm = m.iter().map(|x| x * x).sum();
        cosine_from_parts(dot, nq, nm)
    }
    fn distance_fast(&self, q: &[f64], m: &[f64]) -> f64 {
        let (dot, nq, nm) = dot_and_norms_lanes(q, m);
        cosine_from_parts(dot, nq, nm)
    }
}

/// The built-in metrics. Squared Euclidean is the default; it has the same
/// argmin as Euclidean without the square root.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    SquaredEuclidean,
    Euclidean,
    CosineDistance,
}

static SQUARED_EUCLIDEAN: SquaredEuclidean = SquaredEuclidean;
static EUCLIDEAN: Euclidean = Euclidean;
static COSINE: CosineDistance = CosineDistance;

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::SquaredEuclidean,
        DistanceMetric::Euclidean,
        DistanceMetric::CosineDistance,
    ];

    pub fn kernel(self) -> &'static dyn Distance {
        match self {
            DistanceMetric::SquaredEuclidean => &SQUARED_EUCLIDEAN,
            DistanceMetric::Euclidean => &EUCLIDEAN,
            DistanceMetric::CosineDistance => &COSINE,
        }
    }

    pub fn name(self) -> &'static str {
        self.kernel().name()
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_euclidean" | "sqeuclidean" => Ok(DistanceMetric::SquaredEuclidean),
            "euclidean" | "l2" => Ok(DistanceMetric::Euclidean),
            "cosine_distance" | "cosine" => Ok(DistanceMetric::CosineDistance),
            other => Err(Error::Unknown {
                kind: "distance metric",
                name: other.to_string(),
            }),
        }
    }
}

/// Name → kernel lookup. Starts with the built-ins; callers may add more.
#[derive(Clone)]
pub struct MetricRegistry {
    kernels: BTreeMap<&'static str, Arc<dyn Distance>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut reg = Self {
            kernels: BTreeMap::new(),
        };
        reg.register(Arc::new(SquaredEuclidean));
        reg.register(Arc::new(Euclidean));
        reg.register(Arc::new(CosineDistance));
        reg
    }
}

impl MetricRegistry {
    pub fn register(&mut self, kernel: Arc<dyn Distance>) {
        self.kernels.insert(kernel.name(), kernel);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Distance>> {
        let canonical = DistanceMetric::from_str(name).map(DistanceMetric::name).unwrap_or(name);
        self.kernels
            .get(canonical)
            .cloned()
            .ok_or_else(|| Error::Unknown {
                kind: "distance metric",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.kernels.keys().copied()
    }
}

//! Nearest-mean classification and the linear-head comparator.

mod metric;
mod nmc;
mod probe;

pub use metric::{
    dot_and_norms_lanes, squared_l2_lanes, CosineDistance, Distance, DistanceMetric, Euclidean, MetricRegistry,
    SquaredEuclidean,
};
pub use nmc::{predict, predict_batch, predict_detailed, PackedPrototypes, Prediction};
pub use probe::{
    load_probe, predict_linear, read_probe, save_probe, train_linear_probe, write_probe, LinearProbe, ProbeConfig,
    ProbeGradient, PROB_MAGIC, PROB_VERSION,
};

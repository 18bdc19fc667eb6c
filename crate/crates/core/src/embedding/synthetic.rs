//! Seeded Gaussian class clusters standing in for pre-trained features.

use serde::{Deserialize, Serialize};

use super::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::protocol::split::label_order_group;
use crate::rng::{PolarGaussian, Xoshiro256StarStar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: u32,
    pub dim: usize,
    pub samples_per_class: usize,
    /// Distance between adjacent class centers, in units of `noise_sigma`.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Number of label-order task groups used by [`generate_synthetic`].
    pub num_tasks: u32,
}

impl SyntheticSpec {
    pub fn new(num_classes: u32, dim: usize, samples_per_class: usize) -> Self {
        Self {
            num_classes,
            dim,
            samples_per_class,
            class_separation: 8.0,
            noise_sigma: 1.0,
            seed: 0,
            num_tasks: 1,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.num_classes == 0 {
            return bad("num_classes must be positive");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive");
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            return bad("class_separation must be a positive finite number");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad("noise_sigma must be a positive finite number");
        }
        if self.num_tasks == 0 || self.num_tasks > self.num_classes {
            return bad("num_tasks must be in 1..=num_classes");
        }
        Ok(())
    }

    /// True class centers.
    ///
    /// With `num_classes <= dim` the centers are scaled basis vectors forming
    /// a regular simplex, so every pair is `class_separation * noise_sigma`
    /// apart. Otherwise they lie on the first axis at that spacing, which
    /// keeps adjacent labels at the stated distance.
    pub fn class_centers(&self) -> Vec<Vec<f64>> {
        let gap = self.class_separation * self.noise_sigma;
        let k = self.num_classes as usize;
        (0..k)
            .map(|c| {
                let mut center = vec![0.0; self.dim];
                if k <= self.dim {
                    center[c] = gap / std::f64::consts::SQRT_2;
                } else {
                    center[0] = c as f64 * gap;
                }
                center
            })
            .collect()
    }
}

/// Generates `samples_per_class` records per class, class-major, with task
/// ids from label-order groups of `spec.num_tasks`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<EmbeddingRecord>> {
    spec.check()?;
    let (k, t) = (spec.num_classes, spec.num_tasks);
    generate_synthetic_with(spec, |label| label_order_group(label as usize, k as usize, t as usize) as u32)
}

/// As [`generate_synthetic`] with a caller-supplied class → task map.
///
/// Noise is drawn class by class, sample by sample, coordinate by
/// coordinate, from one xoshiro256** stream seeded with `spec.seed`.
pub fn generate_synthetic_with(
    spec: &SyntheticSpec,
    task_of: impl Fn(u32) -> u32,
) -> Result<Vec<EmbeddingRecord>> {
    spec.check()?;
    let centers = spec.class_centers();
    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    let mut gauss = PolarGaussian::new();
    let mut records = Vec::with_capacity(spec.num_classes as usize * spec.samples_per_class);
    for (label, center) in centers.iter().enumerate() {
        let label = label as u32;
        let task = task_of(label);
        for _ in 0..spec.samples_per_class {
            let vector = center
                .iter()
                .map(|&c| (c + spec.noise_sigma * gauss.sample(&mut rng)) as f32)
                .collect();
            records.push(EmbeddingRecord::new(vector, label, task));
        }
    }
    Ok(records)
}

//! A softmax linear head on frozen features, trained by mini-batch SGD.
//!
//! This is the fine-tune-the-head comparator: sequential training with no
//! forgetting mitigation. It is not part of the nearest-mean learner.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;
use crate::wire::ByteReader;

pub const PROB_MAGIC: [u8; 4] = *b"PROB";
pub const PROB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 128,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gradient of the mean batch loss, laid out like the probe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    dim: usize,
    num_classes: usize,
    /// Row-major `num_classes × dim`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    config: ProbeConfig,
}

impl LinearProbe {
    /// Zero-initialised probe.
    pub fn new(dim: usize, num_classes: usize, config: ProbeConfig) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(Error::InvalidParameter("probe needs dim > 0 and num_classes > 0".into()));
        }
        config.check()?;
        Ok(Self {
            dim,
            num_classes,
            weights: vec![0.0; dim * num_classes],
            biases: vec![0.0; num_classes],
            config,
        })
    }

    pub fn from_parts(
        dim: usize,
        num_classes: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        config: ProbeConfig,
    ) -> Result<Self> {
        let mut probe = Self::new(dim, num_classes, config)?;
        if weights.len() != dim * num_classes || biases.len() != num_classes {
            return Err(Error::DimensionMismatch {
                expected: dim * num_classes + num_classes,
                actual: weights.len() + biases.len(),
            });
        }
        probe.weights = weights;
        probe.biases = biases;
        Ok(probe)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    pub fn state_bytes(&self) -> usize {
        (self.weights.len() + self.biases.len()) * std::mem::size_of::<f64>()
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn logits_into(&self, x: &[f32], out: &mut [f64]) {
        for (c, z) in out.iter_mut().enumerate() {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            *z = self.biases[c] + row.iter().zip(x).map(|(w, &v)| w * v as f64).sum::<f64>();
        }
    }

    pub fn logits(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.num_classes];
        self.logits_into(x, &mut out);
        Ok(out)
    }

    /// Argmax of the logits; ties resolve to the smaller label.
    pub fn predict(&self, x: &[f32]) -> Result<u32> {
        self.predict_among(x, |_| true)?
            .ok_or_else(|| Error::InvalidParameter("no candidate classes".into()))
    }

    /// Argmax restricted to labels accepted by `allowed`.
    pub fn predict_among(&self, x: &[f32], allowed: impl Fn(u32) -> bool) -> Result<Option<u32>> {
        let logits = self.logits(x)?;
        let mut best: Option<(u32, f64)> = None;
        for (c, &z) in logits.iter().enumerate() {
            let c = c as u32;
            if allowed(c) && best.is_none_or(|(_, bz)| z > bz) {
                best = Some((c, z));
            }
        }
        Ok(best.map(|(c, _)| c))
    }

    /// Mean softmax cross-entropy over `batch` plus `weight_decay/2 · |W|²`,
    /// with its analytic gradient.
    pub fn loss_and_gradient(&self, batch: &[&EmbeddingRecord]) -> Result<(f64, ProbeGradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut grad = ProbeGradient {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.num_classes],
        };
        let mut loss = 0.0;
        let mut z = vec![0.0; self.num_classes];
        for r in batch {
            self.check_input(&r.vector)?;
            let y = r.class_label as usize;
            if y >= self.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: r.class_label,
                    num_classes: self.num_classes as u32,
                });
            }
            self.logits_into(&r.vector, &mut z);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            loss += sum.ln() - (z[y].ln());
            for (c, p) in z.iter().enumerate() {
                let delta = p / sum - if c == y { 1.0 } else { 0.0 };
                grad.biases[c] += delta;
                let row = &mut grad.weights[c * self.dim..(c + 1) * self.dim];
                for (g, &x) in row.iter_mut().zip(&r.vector) {
                    *g += delta * x as f64;
                }
            }
        }
        let n = batch.len() as f64;
        loss /= n;
        grad.biases.iter_mut().for_each(|g| *g /= n);
        let wd = self.config.weight_decay;
        for (g, w) in grad.weights.iter_mut().zip(&self.weights) {
            *g = *g / n + wd * w;
        }
        loss += 0.5 * wd * self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok((loss, grad))
    }

    fn step(&mut self, grad: &ProbeGradient) {
        let lr = self.config.learning_rate;
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * g;
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            *b -= lr * g;
        }
    }

    /// Runs `epochs` passes of shuffled mini-batch SGD over `records`,
    /// drawing shuffle orders from `rng`.
    pub fn fit_epochs(
        &mut self,
        records: &[&EmbeddingRecord],
        epochs: u32,
        rng: &mut Xoshiro256StarStar,
    ) -> Result<()> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        for r in records {
            self.check_input(&r.vector)?;
            if r.class_label as usize >= self.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: r.class_label,
                    num_classes: self.num_classes as u32,
                });
            }
        }
        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut batch = Vec::with_capacity(self.config.batch_size);
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(self.config.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| records[i]));
                let (_, grad) = self.loss_and_gradient(&batch)?;
                self.step(&grad);
            }
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "probe parameters diverged; lower the learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// Trains a fresh probe on `train` as a single task.
pub fn train_linear_probe(train: &[EmbeddingRecord], num_classes: usize, config: ProbeConfig) -> Result<LinearProbe> {
    let first = train.first().ok_or(Error::EmptyInput)?;
    let mut probe = LinearProbe::new(first.vector.len(), num_classes, config)?;
    let refs: Vec<&EmbeddingRecord> = train.iter().collect();
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    probe.fit_epochs(&refs, config.epochs, &mut rng)?;
    Ok(probe)
}

pub fn predict_linear(x: &[f32], probe: &LinearProbe) -> Result<u32> {
    probe.predict(x)
}

/// PROB1 layout, little-endian: magic, version u32, dim u32, num_classes
/// u32, learning_rate f64, epochs u32, batch_size u32, weight_decay f64,
/// seed u64, weights (row-major f64), biases f64.
pub fn write_probe<W: Write>(mut sink: W, probe: &LinearProbe) -> Result<()> {
    let c = &probe.config;
    sink.write_all(&PROB_MAGIC)?;
    sink.write_all(&PROB_VERSION.to_le_bytes())?;
    sink.write_all(&(probe.dim as u32).to_le_bytes())?;
    sink.write_all(&(probe.num_classes as u32).to_le_bytes())?;
    sink.write_all(&c.learning_rate.to_le_bytes())?;
    sink.write_all(&c.epochs.to_le_bytes())?;
    sink.write_all(&(c.batch_size as u32).to_le_bytes())?;
    sink.write_all(&c.weight_decay.to_le_bytes())?;
    sink.write_all(&c.seed.to_le_bytes())?;
    for v in probe.weights.iter().chain(&probe.biases) {
        sink.write_all(&v.to_le_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_probe<R: Read>(source: R) -> Result<LinearProbe> {
    let mut r = ByteReader::new(source);
    r.expect_magic(PROB_MAGIC)?;
    r.expect_version(PROB_VERSION)?;
    let dim = r.u32("dim")? as usize;
    let num_classes = r.u32("num_classes")? as usize;
    let config = ProbeConfig {
        learning_rate: r.f64("learning_rate")?,
        epochs: r.u32("epochs")?,
        batch_size: r.u32("batch_size")? as usize,
        weight_decay: r.f64("weight_decay")?,
        seed: r.u64("seed")?,
    };
    let mut weights = Vec::with_capacity(dim * num_classes);
    for _ in 0..dim * num_classes {
        weights.push(r.f64("weight")?);
    }
    let mut biases = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        biases.push(r.f64("bias")?);
    }
    r.expect_end()?;
    LinearProbe::from_parts(dim, num_classes, weights, biases, config)
}

pub fn save_probe(probe: &LinearProbe, path: impl AsRef<Path>) -> Result<()> {
    write_probe(BufWriter::new(File::create(path)?), probe)
}

pub fn load_probe(path: impl AsRef<Path>) -> Result<LinearProbe> {
    read_probe(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{generate_synthetic, SyntheticSpec};
    use crate::rng::PolarGaussian;

    #[test]
    fn bias_decides_with_zero_weights() {
        let probe = LinearProbe::from_parts(3, 2, vec![0.0; 6], vec![1.0, 0.0], ProbeConfig::default()).unwrap();
        for x in [[0.0f32, 0.0, 0.0], [5.0, -5.0, 9.0]] {
            assert_eq!(predict_linear(&x, &probe).unwrap(), 0);
        }
    }

    #[test]
    fn identity_weights() {
        let probe =
            LinearProbe::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], ProbeConfig::default()).unwrap();
        assert_eq!(predict_linear(&[0.0, 1.0], &probe).unwrap(), 1);
        assert_eq!(predict_linear(&[1.0, 0.0], &probe).unwrap(), 0);
        // tie → smaller label
        assert_eq!(predict_linear(&[1.0, 1.0], &probe).unwrap(), 0);
        assert!(predict_linear(&[1.0], &probe).is_err());
    }

    #[test]
    fn restricted_argmax() {
        let probe =
            LinearProbe::from_parts(1, 3, vec![3.0, 2.0, 1.0], vec![0.0; 3], ProbeConfig::default()).unwrap();
        assert_eq!(probe.predict_among(&[1.0], |c| c != 0).unwrap(), Some(1));
        assert_eq!(probe.predict_among(&[1.0], |_| false).unwrap(), None);
    }

    #[test]
    fn zero_epochs_is_initialisation() {
        let spec = SyntheticSpec::new(4, 8, 20);
        let data = generate_synthetic(&spec).unwrap();
        let config = ProbeConfig {
            epochs: 0,
            ..Default::default()
        };
        let probe = train_linear_probe(&data, 4, config).unwrap();
        assert!(probe.weights().iter().all(|&w| w == 0.0));
        assert!(probe.biases().iter().all(|&b| b == 0.0));
        let correct = data.iter().filter(|r| probe.predict(&r.vector).unwrap() == r.class_label).count();
        assert_eq!(correct, 20); // every prediction is class 0
    }

    #[test]
    fn separable_two_class_training() {
        let mut spec = SyntheticSpec::new(2, 16, 500);
        spec.class_separation = 8.0;
        spec.seed = 4;
        let data = generate_synthetic(&spec).unwrap();
        let probe = train_linear_probe(&data, 2, ProbeConfig::default()).unwrap();
        let correct = data.iter().filter(|r| probe.predict(&r.vector).unwrap() == r.class_label).count();
        assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut spec = SyntheticSpec::new(3, 4, 50);
        spec.class_separation = 2.0;
        let data = generate_synthetic(&spec).unwrap();
        let config = ProbeConfig {
            epochs: 3,
            batch_size: 16,
            seed: 77,
            ..Default::default()
        };
        let a = train_linear_probe(&data, 3, config).unwrap();
        let b = train_linear_probe(&data, 3, config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(
            train_linear_probe(&[], 2, ProbeConfig::default()),
            Err(Error::EmptyInput)
        ));
        let bad = [EmbeddingRecord::new(vec![0.0; 2], 5, 0)];
        assert!(matches!(
            train_linear_probe(&bad, 2, ProbeConfig::default()),
            Err(Error::LabelOutOfRange { label: 5, .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(8);
        let mut g = PolarGaussian::new();
        let (dim, k) = (5, 3);
        let config = ProbeConfig {
            weight_decay: 0.1,
            ..Default::default()
        };
        let w: Vec<f64> = (0..dim * k).map(|_| g.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..k).map(|_| g.sample(&mut rng)).collect();
        let mut probe = LinearProbe::from_parts(dim, k, w, b, config).unwrap();
        let data: Vec<EmbeddingRecord> = (0..7)
            .map(|i| EmbeddingRecord::new((0..dim).map(|_| g.sample(&mut rng) as f32).collect(), i % k as u32, 0))
            .collect();
        let batch: Vec<&EmbeddingRecord> = data.iter().collect();
        let (_, grad) = probe.loss_and_gradient(&batch).unwrap();
        let h = 1e-6;
        for i in 0..dim * k {
            let orig = probe.weights()[i];
            probe.weights_mut()[i] = orig + h;
            let up = probe.loss_and_gradient(&batch).unwrap().0;
            probe.weights_mut()[i] = orig - h;
            let down = probe.loss_and_gradient(&batch).unwrap().0;
            probe.weights_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - grad.weights[i]).abs() < 1e-6, "w{i}: {numeric} vs {}", grad.weights[i]);
        }
    }

    #[test]
    fn probe_file_roundtrip_and_errors() {
        let config = ProbeConfig {
            seed: 3,
            ..Default::default()
        };
        let probe = LinearProbe::from_parts(2, 3, vec![0.5, -1.0, 2.0, 0.0, 1e-300, -7.0], vec![0.1, 0.2, 0.3], config)
            .unwrap();
        let mut bytes = Vec::new();
        write_probe(&mut bytes, &probe).unwrap();
        assert_eq!(&bytes[..4], b"PROB");
        assert_eq!(read_probe(&bytes[..]).unwrap(), probe);
        assert!(matches!(read_probe(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        bytes[0] = b'Q';
        assert!(matches!(read_probe(&bytes[..]), Err(Error::BadMagic { .. })));
    }
}

//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proto_cl::embedding::EmbeddingRecord;
use proto_cl::prototype::PrototypeTable;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct TestRng(Xoshiro256PlusPlus);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo) as u64) as usize
    }

    /// Box-Muller; deliberately not the generator under test.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (self.0.next_u64() % (i as u64 + 1)) as usize;
            v.swap(i, j);
        }
        v
    }
}

/// Records around per-class random offsets, so means stay away from zero.
pub fn random_records(rng: &mut TestRng, n: usize, dim: usize, classes: usize) -> Vec<EmbeddingRecord> {
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.uniform() * 20.0 - 10.0).collect())
        .collect();
    (0..n)
        .map(|_| {
            let c = rng.range(0, classes);
            let v = centers[c].iter().map(|m| (m + rng.normal()) as f32).collect();
            EmbeddingRecord::new(v, c as u32, 0)
        })
        .collect()
}

pub fn random_queries(rng: &mut TestRng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..dim).map(|_| (rng.normal() * scale) as f32).collect())
        .collect()
}

/// label → (count, mean) by direct summation.
pub fn oracle_means(records: &[EmbeddingRecord]) -> BTreeMap<u32, (u64, Vec<f64>)> {
    let mut acc: BTreeMap<u32, (u64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.class_label).or_insert_with(|| (0, vec![0.0; r.vector.len()]));
        e.0 += 1;
        for (s, v) in e.1.iter_mut().zip(&r.vector) {
            *s += *v as f64;
        }
    }
    for (n, s) in acc.values_mut() {
        for x in s.iter_mut() {
            *x /= *n as f64;
        }
    }
    acc
}

/// Relative error with an absolute floor of 1e-12 for near-zero values.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Largest per-coordinate relative error between a table and oracle means;
/// `None` if labels or counts differ.
pub fn table_vs_oracle(table: &PrototypeTable, oracle: &BTreeMap<u32, (u64, Vec<f64>)>) -> Option<f64> {
    if table.len() != oracle.len() {
        return None;
    }
    let mut worst = 0.0f64;
    for (label, (count, mean)) in oracle {
        let p = table.get(*label)?;
        if p.count != *count {
            return None;
        }
        for (a, b) in p.mean.iter().zip(mean) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    Some(worst)
}

pub fn table_vs_table(a: &PrototypeTable, b: &PrototypeTable) -> Option<f64> {
    let oracle = b.iter().map(|p| (p.class_label, (p.count, p.mean.clone()))).collect();
    table_vs_oracle(a, &oracle)
}

/// Squared Euclidean argmin by a plain double loop; ties to the smaller label.
pub fn oracle_nearest(query: &[f32], means: &[(u32, Vec<f64>)]) -> (u32, f64) {
    let mut best_label = u32::MAX;
    let mut best = f64::INFINITY;
    for (label, mean) in means {
        let mut d = 0.0;
        for k in 0..mean.len() {
            let diff = query[k] as f64 - mean[k];
            d += diff * diff;
        }
        if d < best || (d == best && *label < best_label) {
            best = d;
            best_label = *label;
        }
    }
    (best_label, best)
}

pub fn means_of(table: &PrototypeTable) -> Vec<(u32, Vec<f64>)> {
    table.iter().map(|p| (p.class_label, p.mean.clone())).collect()
}

/// Forgetting straight from its definition, with 1-based indices.
pub fn oracle_forgetting(values: &[Vec<Option<f64>>]) -> f64 {
    let t_total = values.len();
    let a = |t: usize, i: usize| values[t - 1][i - 1];
    let mut sum = 0.0;
    for i in 1..t_total {
        let mut best = f64::NEG_INFINITY;
        for t in i..t_total {
            if let Some(v) = a(t, i) {
                if v > best {
                    best = v;
                }
            }
        }
        sum += best - a(t_total, i).unwrap();
    }
    sum / (t_total - 1) as f64
}

/// Softmax cross-entropy loss (plus L2 term) computed from scratch.
pub fn oracle_probe_loss(
    weights: &[f64],
    biases: &[f64],
    dim: usize,
    weight_decay: f64,
    batch: &[EmbeddingRecord],
) -> f64 {
    let k = biases.len();
    let mut total = 0.0;
    for r in batch {
        let logits: Vec<f64> = (0..k)
            .map(|c| biases[c] + (0..dim).map(|j| weights[c * dim + j] * r.vector[j] as f64).sum::<f64>())
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        total += lse - logits[r.class_label as usize];
    }
    total / batch.len() as f64 + 0.5 * weight_decay * weights.iter().map(|w| w * w).sum::<f64>()
}

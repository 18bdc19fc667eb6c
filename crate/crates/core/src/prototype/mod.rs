//! Per-class running means: the learner's entire state.
//!
//! A [`PrototypeTable`] holds one count and one mean vector per class and
//! nothing else, so its size is `O(classes × dim)` however long the stream.
//! Means are accumulated in `f64` even though inputs are `f32`.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingRecord;
use crate::error::{Error, Result};

pub use io::{load_table, read_table, save_table, write_table, PROT_MAGIC, PROT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrototype {
    pub class_label: u32,
    pub count: u64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeTable {
    dim: usize,
    prototypes: BTreeMap<u32, ClassPrototype>,
}

impl PrototypeTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("prototype dim must be positive".into()));
        }
        Ok(Self {
            dim,
            prototypes: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn get(&self, label: u32) -> Option<&ClassPrototype> {
        self.prototypes.get(&label)
    }

    /// Prototypes in ascending label order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &ClassPrototype> {
        self.prototypes.values()
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.prototypes.keys().copied()
    }

    pub fn total_count(&self) -> u64 {
        self.iter().map(|p| p.count).sum()
    }

    /// Approximate heap footprint of the stored state.
    pub fn state_bytes(&self) -> usize {
        self.iter()
            .map(|p| p.mean.len() * std::mem::size_of::<f64>() + std::mem::size_of::<ClassPrototype>())
            .sum()
    }

    pub fn observe(&mut self, record: &EmbeddingRecord) -> Result<()> {
        self.observe_vector(record.class_label, &record.vector)
    }

    /// Folds one sample into its class mean: `mean += (x - mean) / count`.
    pub fn observe_vector(&mut self, label: u32, vector: &[f32]) -> Result<()> {
        self.check_vector(vector)?;
        match self.prototypes.get_mut(&label) {
            Some(proto) => {
                proto.count += 1;
                let n = proto.count as f64;
                for (m, &x) in proto.mean.iter_mut().zip(vector) {
                    *m += (x as f64 - *m) / n;
                }
            }
            None => {
                self.prototypes.insert(
                    label,
                    ClassPrototype {
                        class_label: label,
                        count: 1,
                        mean: vector.iter().map(|&x| x as f64).collect(),
                    },
                );
            }
        }
        Ok(())
    }

    fn check_vector(&self, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if let Some(coordinate) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                record: 0,
                coordinate,
            });
        }
        Ok(())
    }

    /// Inserts a prototype as-is, replacing any existing entry for the label.
    pub(crate) fn insert(&mut self, proto: ClassPrototype) -> Result<()> {
        if proto.mean.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: proto.mean.len(),
            });
        }
        if proto.count == 0 {
            return Err(Error::InvalidParameter(format!(
                "prototype for class {} has count 0",
                proto.class_label
            )));
        }
        self.prototypes.insert(proto.class_label, proto);
        Ok(())
    }
}

/// Two-pass class means: per-class `f64` sums divided by counts.
pub fn batch_mean(records: &[EmbeddingRecord], dim: usize) -> Result<PrototypeTable> {
    let mut sums: BTreeMap<u32, (u64, Vec<f64>)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.vector.len(),
            });
        }
        if let Some(coordinate) = r.first_non_finite() {
            return Err(Error::NonFinite {
                record: i as u64,
                coordinate,
            });
        }
        let (count, sum) = sums.entry(r.class_label).or_insert_with(|| (0, vec![0.0; dim]));
        *count += 1;
        for (s, &x) in sum.iter_mut().zip(&r.vector) {
            *s += x as f64;
        }
    }
    let mut table = PrototypeTable::new(dim)?;
    for (label, (count, sum)) in sums {
        let n = count as f64;
        table.insert(ClassPrototype {
            class_label: label,
            count,
            mean: sum.into_iter().map(|s| s / n).collect(),
        })?;
    }
    Ok(table)
}

/// Combines two tables built from disjoint parts of a stream.
pub fn merge(a: &PrototypeTable, b: &PrototypeTable) -> Result<PrototypeTable> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            actual: b.dim,
        });
    }
    let mut out = a.clone();
    for pb in b.iter() {
        match out.prototypes.get_mut(&pb.class_label) {
            None => {
                out.prototypes.insert(pb.class_label, pb.clone());
            }
            Some(pa) => {
                let (na, nb) = (pa.count as f64, pb.count as f64);
                let n = na + nb;
                for (ma, mb) in pa.mean.iter_mut().zip(&pb.mean) {
                    *ma = (na * *ma + nb * mb) / n;
                }
                pa.count += pb.count;
            }
        }
    }
    Ok(out)
}

use std::path::Path;

use super::format::{read_dataset, DatasetHeader, EmbeddingRecord};
use crate::error::{Error, Result};

/// A fully loaded dataset: header plus records in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<EmbeddingRecord>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (header, records) = read_dataset(path)?;
        Ok(Self { header, records })
    }

    /// Builds the header the records would be written with.
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().ok_or(Error::EmptyInput)?.vector.len();
        let mut num_classes = 0;
        let mut num_tasks = 0;
        for r in &records {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.vector.len(),
                });
            }
            num_classes = num_classes.max(r.class_label + 1);
            num_tasks = num_tasks.max(r.task_id + 1);
        }
        let header = DatasetHeader::new(dim as u32, records.len() as u64, num_classes, num_tasks);
        Ok(Self { header, records })
    }

    pub fn dim(&self) -> usize {
        self.header.dim as usize
    }
}

//! On-disk embedding datasets and synthetic stand-ins.

mod dataset;
mod format;
mod sidecar;
mod synthetic;
mod validate;

pub(crate) use format::read_up_to;
pub use format::{
    read_dataset, read_records, write_dataset, write_records, DatasetHeader, EmbeddingReader,
    EmbeddingRecord, EMBD_MAGIC, EMBD_VERSION, HEADER_LEN,
};
pub use dataset::Dataset;
pub use sidecar::{read_sidecar, sidecar_path, write_sidecar, DatasetMeta, ExtractorInfo};
pub use synthetic::{generate_synthetic, generate_synthetic_with, SyntheticSpec};
pub use validate::{validate_dataset, validate_source, ValidationReport, Violation};

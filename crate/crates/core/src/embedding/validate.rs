use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{read_up_to, DatasetHeader, RawCursor, RawItem, EMBD_MAGIC, EMBD_VERSION, HEADER_LEN};
use crate::error::Result;

/// A single broken invariant found while scanning a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    BadMagic { found: [u8; 4] },
    UnsupportedVersion { found: u32 },
    ShortHeader { length: u64 },
    ZeroDimension,
    NonFinite { record: u64, coordinate: usize },
    LabelOutOfRange { record: u64, label: u32, num_classes: u32 },
    TaskOutOfRange { record: u64, task_id: u32, num_tasks: u32 },
    Truncated { offset: u64, records_present: u64, declared: u64 },
    TrailingData { offset: u64, bytes: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadMagic { found } => {
                write!(f, "bad magic {found:?}, expected {EMBD_MAGIC:?}")
            }
            Violation::UnsupportedVersion { found } => {
                write!(f, "unsupported format version {found}, expected {EMBD_VERSION}")
            }
            Violation::ShortHeader { length } => {
                write!(f, "file is {length} bytes, shorter than the {HEADER_LEN}-byte header")
            }
            Violation::ZeroDimension => write!(f, "header declares dim 0"),
            Violation::NonFinite { record, coordinate } => {
                write!(f, "record {record}: non-finite value at coordinate {coordinate}")
            }
            Violation::LabelOutOfRange {
                record,
                label,
                num_classes,
            } => write!(
                f,
                "record {record}: class_label {label} >= num_classes {num_classes}"
            ),
            Violation::TaskOutOfRange {
                record,
                task_id,
                num_tasks,
            } => write!(f, "record {record}: task_id {task_id} >= num_tasks {num_tasks}"),
            Violation::Truncated {
                offset,
                records_present,
                declared,
            } => write!(
                f,
                "body ends at byte offset {offset} with {records_present} complete records, header declares {declared}"
            ),
            Violation::TrailingData { offset, bytes } => {
                write!(f, "{bytes} unexpected bytes after offset {offset}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub header: Option<DatasetHeader>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans a source and lists every invariant violation. Only I/O failures
/// are returned as errors.
pub fn validate_source<R: Read>(mut source: R) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let mut bytes = [0u8; HEADER_LEN as usize];
    let n = read_up_to(&mut source, &mut bytes)?;
    if n >= 4 && bytes[0..4] != EMBD_MAGIC {
        report.violations.push(Violation::BadMagic {
            found: bytes[0..4].try_into().unwrap(),
        });
    }
    if n < bytes.len() {
        report
            .violations
            .push(Violation::ShortHeader { length: n as u64 });
        return Ok(report);
    }
    let header = DatasetHeader::decode_unchecked(&bytes);
    report.header = Some(header);
    if !report.is_valid() {
        return Ok(report);
    }
    if header.format_version != EMBD_VERSION {
        report.violations.push(Violation::UnsupportedVersion {
            found: header.format_version,
        });
        return Ok(report);
    }
    if header.dim == 0 {
        report.violations.push(Violation::ZeroDimension);
    }

    let mut cursor = RawCursor::new(source, header);
    let mut index = 0u64;
    while let Some(item) = cursor.next_raw()? {
        match item {
            RawItem::Truncated { index, offset } => {
                report.violations.push(Violation::Truncated {
                    offset,
                    records_present: index,
                    declared: header.record_count,
                });
            }
            RawItem::Record(raw) => {
                for (coordinate, v) in raw.vector.iter().enumerate() {
                    if !v.is_finite() {
                        report.violations.push(Violation::NonFinite {
                            record: index,
                            coordinate,
                        });
                    }
                }
                if raw.class_label >= header.num_classes {
                    report.violations.push(Violation::LabelOutOfRange {
                        record: index,
                        label: raw.class_label,
                        num_classes: header.num_classes,
                    });
                }
                if raw.task_id >= header.num_tasks {
                    report.violations.push(Violation::TaskOutOfRange {
                        record: index,
                        task_id: raw.task_id,
                        num_tasks: header.num_tasks,
                    });
                }
                index += 1;
            }
        }
    }
    let offset = cursor.offset();
    let trailing = cursor.trailing_bytes()?;
    if trailing > 0 {
        report.violations.push(Violation::TrailingData {
            offset,
            bytes: trailing,
        });
    }
    Ok(report)
}

pub fn validate_dataset(path: impl AsRef<Path>) -> Result<ValidationReport> {
    validate_source(BufReader::new(File::open(path)?))
}

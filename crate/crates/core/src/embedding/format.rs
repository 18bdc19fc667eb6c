//! The EMBD1 binary container.
//!
//! Layout, all integers little-endian, no padding:
//!
//! | offset | size | field            |
//! |--------|------|------------------|
//! | 0      | 4    | magic `b"EMBD"`  |
//! | 4      | 4    | format_version=1 |
//! | 8      | 4    | dim              |
//! | 12     | 8    | record_count     |
//! | 20     | 4    | num_classes      |
//! | 24     | 4    | num_tasks        |
//! | 28     | ...  | records          |
//!
//! Each record is `class_label: u32`, `task_id: u32`, then `dim` IEEE-754
//! `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBD_MAGIC: [u8; 4] = *b"EMBD";
pub const EMBD_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 28;

/// One frozen feature vector with its class label and task identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub vector: Vec<f32>,
    pub class_label: u32,
    pub task_id: u32,
}

impl EmbeddingRecord {
    pub fn new(vector: Vec<f32>, class_label: u32, task_id: u32) -> Self {
        Self {
            vector,
            class_label,
            task_id,
        }
    }

    /// Index of the first non-finite coordinate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.vector.iter().position(|v| !v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub magic: [u8; 4],
    pub format_version: u32,
    pub dim: u32,
    pub record_count: u64,
    pub num_classes: u32,
    pub num_tasks: u32,
}

impl DatasetHeader {
    pub fn new(dim: u32, record_count: u64, num_classes: u32, num_tasks: u32) -> Self {
        Self {
            magic: EMBD_MAGIC,
            format_version: EMBD_VERSION,
            dim,
            record_count,
            num_classes,
            num_tasks,
        }
    }

    /// Size in bytes of one encoded record.
    pub fn record_len(&self) -> u64 {
        8 + 4 * self.dim as u64
    }

    /// Total file size implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.record_count * self.record_len()
    }

    pub fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..4].copy_from_slice(&self.magic);
        out[4..8].copy_from_slice(&self.format_version.to_le_bytes());
        out[8..12].copy_from_slice(&self.dim.to_le_bytes());
        out[12..20].copy_from_slice(&self.record_count.to_le_bytes());
        out[20..24].copy_from_slice(&self.num_classes.to_le_bytes());
        out[24..28].copy_from_slice(&self.num_tasks.to_le_bytes());
        out
    }

    /// Decodes without checking magic or version.
    pub fn decode_unchecked(bytes: &[u8; HEADER_LEN as usize]) -> Self {
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        Self {
            magic: bytes[0..4].try_into().unwrap(),
            format_version: u32_at(4),
            dim: u32_at(8),
            record_count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            num_classes: u32_at(20),
            num_tasks: u32_at(24),
        }
    }

    pub fn decode(bytes: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        let header = Self::decode_unchecked(bytes);
        header.check_identity()?;
        Ok(header)
    }

    fn check_identity(&self) -> Result<()> {
        if self.magic != EMBD_MAGIC {
            return Err(Error::BadMagic {
                expected: EMBD_MAGIC,
                found: self.magic,
            });
        }
        if self.format_version != EMBD_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: EMBD_VERSION,
                found: self.format_version,
            });
        }
        Ok(())
    }
}

/// Reads until `buf` is full or the source is exhausted; returns bytes read.
pub(crate) fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads and checks the header. A source shorter than the magic is reported
/// as truncation; a wrong magic is reported before any length check.
pub(crate) fn read_header<R: Read>(reader: &mut R) -> Result<DatasetHeader> {
    let mut bytes = [0u8; HEADER_LEN as usize];
    let n = read_up_to(reader, &mut bytes)?;
    if n >= 4 && bytes[0..4] != EMBD_MAGIC {
        return Err(Error::BadMagic {
            expected: EMBD_MAGIC,
            found: bytes[0..4].try_into().unwrap(),
        });
    }
    if n < bytes.len() {
        return Err(Error::Truncated {
            offset: n as u64,
            context: format!("header needs {HEADER_LEN} bytes"),
        });
    }
    DatasetHeader::decode(&bytes)
}

/// Writes records to any sink; returns the header that was written.
pub fn write_records<W: Write>(
    mut sink: W,
    records: &[EmbeddingRecord],
    dim: usize,
) -> Result<DatasetHeader> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut num_classes = 0u32;
    let mut num_tasks = 0u32;
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
        num_classes = num_classes.max(r.class_label + 1);
        num_tasks = num_tasks.max(r.task_id + 1);
    }
    let dim_u32 = u32::try_from(dim)
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("dim {dim} not in 1..=u32::MAX")))?;
    let header = DatasetHeader::new(dim_u32, records.len() as u64, num_classes, num_tasks);

    sink.write_all(&header.encode())?;
    let mut buf = Vec::with_capacity(header.record_len() as usize);
    for r in records {
        buf.clear();
        buf.extend_from_slice(&r.class_label.to_le_bytes());
        buf.extend_from_slice(&r.task_id.to_le_bytes());
        for v in &r.vector {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    sink.flush()?;
    Ok(header)
}

/// Writes an EMBD1 file.
pub fn write_dataset(
    records: &[EmbeddingRecord],
    dim: usize,
    path: impl AsRef<Path>,
) -> Result<DatasetHeader> {
    // Check everything before touching the filesystem so a bad call leaves
    // no file behind.
    let mut scratch = std::io::sink();
    write_records(&mut scratch, records, dim)?;
    let file = File::create(path)?;
    write_records(BufWriter::new(file), records, dim)
}

/// A record as stored, before any invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawRecord {
    pub class_label: u32,
    pub task_id: u32,
    pub vector: Vec<f32>,
}

/// Low-level record cursor shared by the strict reader and the validator.
pub(crate) struct RawCursor<R> {
    source: R,
    header: DatasetHeader,
    next_index: u64,
    offset: u64,
    buf: Vec<u8>,
}

pub(crate) enum RawItem {
    Record(RawRecord),
    /// The body ended inside record `index`; `offset` is the end of data.
    Truncated { index: u64, offset: u64 },
}

impl<R: Read> RawCursor<R> {
    pub fn new(source: R, header: DatasetHeader) -> Self {
        Self {
            source,
            header,
            next_index: 0,
            offset: HEADER_LEN,
            buf: vec![0u8; header.record_len() as usize],
        }
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn next_raw(&mut self) -> Result<Option<RawItem>> {
        if self.next_index >= self.header.record_count {
            return Ok(None);
        }
        let n = read_up_to(&mut self.source, &mut self.buf)?;
        if n < self.buf.len() {
            let item = RawItem::Truncated {
                index: self.next_index,
                offset: self.offset + n as u64,
            };
            self.offset += n as u64;
            self.next_index = self.header.record_count;
            return Ok(Some(item));
        }
        let b = &self.buf;
        let record = RawRecord {
            class_label: u32::from_le_bytes(b[0..4].try_into().unwrap()),
            task_id: u32::from_le_bytes(b[4..8].try_into().unwrap()),
            vector: b[8..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        self.offset += b.len() as u64;
        self.next_index += 1;
        Ok(Some(RawItem::Record(record)))
    }

    /// Number of bytes remaining after the declared records.
    pub fn trailing_bytes(&mut self) -> Result<u64> {
        Ok(std::io::copy(&mut self.source, &mut std::io::sink())?)
    }
}

/// Streaming reader over an EMBD1 source.
///
/// Yields records one at a time; memory use is one record regardless of
/// file size. Non-finite coordinates and truncation are errors. After the
/// last declared record the iterator ends without inspecting trailing bytes;
/// [`read_dataset`] performs that check.
pub struct EmbeddingReader<R> {
    cursor: RawCursor<R>,
    failed: bool,
}

impl EmbeddingReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> EmbeddingReader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let header = read_header(&mut source)?;
        Ok(Self {
            cursor: RawCursor::new(source, header),
            failed: false,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        self.cursor.header()
    }

    fn next_record(&mut self) -> Result<Option<EmbeddingRecord>> {
        let index = self.cursor.next_index();
        match self.cursor.next_raw()? {
            None => Ok(None),
            Some(RawItem::Truncated { index, offset }) => Err(Error::Truncated {
                offset,
                context: format!(
                    "record {index} of {} is incomplete ({} bytes per record)",
                    self.header().record_count,
                    self.header().record_len()
                ),
            }),
            Some(RawItem::Record(raw)) => {
                let record = EmbeddingRecord::new(raw.vector, raw.class_label, raw.task_id);
                if let Some(coordinate) = record.first_non_finite() {
                    return Err(Error::NonFinite {
                        record: index,
                        coordinate,
                    });
                }
                Ok(Some(record))
            }
        }
    }

    fn into_cursor(self) -> RawCursor<R> {
        self.cursor
    }
}

impl<R: Read> Iterator for EmbeddingReader<R> {
    type Item = Result<EmbeddingRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads a whole source, rejecting bytes past the declared records.
pub fn read_records<R: Read>(source: R) -> Result<(DatasetHeader, Vec<EmbeddingRecord>)> {
    let mut reader = EmbeddingReader::new(source)?;
    let header = *reader.header();
    let mut records = Vec::with_capacity(header.record_count.min(1 << 20) as usize);
    for r in reader.by_ref() {
        records.push(r?);
    }
    let mut cursor = reader.into_cursor();
    let offset = cursor.offset();
    if cursor.trailing_bytes()? > 0 {
        return Err(Error::TrailingData { offset });
    }
    Ok((header, records))
}

/// Reads an EMBD1 file fully into memory.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<EmbeddingRecord>)> {
    read_records(BufReader::new(File::open(path)?))
}

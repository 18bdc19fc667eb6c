//! PROT1 state files.
//!
//! Little-endian, no padding: magic `b"PROT"`, version `u32` = 1, dim `u32`,
//! class count `u32`, then per class in ascending label order: label `u32`,
//! count `u64`, `dim` × `f64` mean.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ClassPrototype, PrototypeTable};
use crate::error::{Error, Result};
use crate::wire::ByteReader;

pub const PROT_MAGIC: [u8; 4] = *b"PROT";
pub const PROT_VERSION: u32 = 1;

pub fn write_table<W: Write>(mut sink: W, table: &PrototypeTable) -> Result<()> {
    sink.write_all(&PROT_MAGIC)?;
    sink.write_all(&PROT_VERSION.to_le_bytes())?;
    sink.write_all(&(table.dim() as u32).to_le_bytes())?;
    sink.write_all(&(table.len() as u32).to_le_bytes())?;
    for p in table.iter() {
        sink.write_all(&p.class_label.to_le_bytes())?;
        sink.write_all(&p.count.to_le_bytes())?;
        for m in &p.mean {
            sink.write_all(&m.to_le_bytes())?;
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn read_table<R: Read>(source: R) -> Result<PrototypeTable> {
    let mut r = ByteReader::new(source);
    r.expect_magic(PROT_MAGIC)?;
    r.expect_version(PROT_VERSION)?;
    let dim = r.u32("dim")? as usize;
    let classes = r.u32("class count")?;
    let mut table = PrototypeTable::new(dim)?;
    for i in 0..classes {
        let class_label = r.u32("class label")?;
        let count = r.u64("class count")?;
        let mut mean = Vec::with_capacity(dim);
        for _ in 0..dim {
            mean.push(r.f64("mean coordinate")?);
        }
        if let Some(coordinate) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                record: i as u64,
                coordinate,
            });
        }
        if table.get(class_label).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate class label {class_label} in prototype file"
            )));
        }
        table.insert(ClassPrototype {
            class_label,
            count,
            mean,
        })?;
    }
    r.expect_end()?;
    Ok(table)
}

pub fn save_table(table: &PrototypeTable, path: impl AsRef<Path>) -> Result<()> {
    write_table(BufWriter::new(File::create(path)?), table)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<PrototypeTable> {
    read_table(BufReader::new(File::open(path)?))
}

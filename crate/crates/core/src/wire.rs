//! Little-endian field reader shared by the state-file formats.

use std::io::Read;

use crate::embedding::read_up_to;
use crate::error::{Error, Result};

pub(crate) struct ByteReader<R> {
    source: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub fn new(source: R) -> Self {
        Self { source, offset: 0 }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let n = read_up_to(&mut self.source, &mut buf)?;
        if n < N {
            return Err(Error::Truncated {
                offset: self.offset + n as u64,
                context: format!("{what} needs {N} bytes"),
            });
        }
        self.offset += N as u64;
        Ok(buf)
    }

    pub fn expect_magic(&mut self, magic: [u8; 4]) -> Result<()> {
        let found = self.take::<4>("magic")?;
        if found != magic {
            return Err(Error::BadMagic {
                expected: magic,
                found,
            });
        }
        Ok(())
    }

    pub fn expect_version(&mut self, version: u32) -> Result<()> {
        let found = self.u32("format version")?;
        if found != version {
            return Err(Error::UnsupportedVersion {
                expected: version,
                found,
            });
        }
        Ok(())
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    pub fn expect_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        if read_up_to(&mut self.source, &mut probe)? > 0 {
            return Err(Error::TrailingData {
                offset: self.offset,
            });
        }
        Ok(())
    }
}

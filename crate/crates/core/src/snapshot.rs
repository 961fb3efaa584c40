//! KGNR1 binary field snapshots (little-endian).
//!
//! Layout: magic `KGNR1\0`, u16 version, u32 n, f64 side length, f64 time,
//! f64 epsilon, u8 kind (0 real, 1 complex), then `n^2` samples row-major.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Field, RealField, Spectral};
use crate::grid::{make_grid, TorusGrid};
use crate::Complex64;

pub const MAGIC: &[u8; 6] = b"KGNR1\0";
pub const VERSION: u16 = 1;

/// A field with the metadata stored alongside it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: Field,
    pub time: f64,
    /// Zero when not applicable.
    pub eps: f64,
}

impl Snapshot {
    pub fn real(field: RealField, time: f64, eps: f64) -> Self {
        Snapshot {
            field: Field::Real(field),
            time,
            eps,
        }
    }

    pub fn complex(field: ComplexField, time: f64, eps: f64) -> Self {
        Snapshot {
            field: Field::Complex(field),
            time,
            eps,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.field.grid()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let grid = self.grid();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(grid.n_per_dim() as u32).to_le_bytes())?;
        w.write_all(&grid.side_length().to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        let mut buf = Vec::new();
        match &self.field {
            Field::Real(f) => {
                buf.push(0u8);
                for v in f.values() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Field::Complex(f) => {
                buf.push(1u8);
                for v in f.values() {
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes(take(&mut r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(take(&mut r)?) as usize;
        let side = f64::from_le_bytes(take(&mut r)?);
        let time = f64::from_le_bytes(take(&mut r)?);
        let eps = f64::from_le_bytes(take(&mut r)?);
        let [kind] = take::<1>(&mut r)?;
        let grid = make_grid(n, side).map_err(|e| Error::Format(format!("invalid grid header: {e}")))?;
        let count = n * n;
        let field = match kind {
            0 => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(f64::from_le_bytes(take(&mut r)?));
                }
                Field::Real(RealField::from_values(&grid, v)?)
            }
            1 => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    let re = f64::from_le_bytes(take(&mut r)?);
                    let im = f64::from_le_bytes(take(&mut r)?);
                    v.push(Complex64::new(re, im));
                }
                Field::Complex(ComplexField::from_values(&grid, v)?)
            }
            k => return Err(Error::Format(format!("unknown field kind {k}"))),
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after field data".into()));
        }
        Ok(Snapshot { field, time, eps })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Snapshot::read_from(std::io::BufReader::new(f))
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("snapshot is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b)
}

//! Binary matrix container: `SDMD` magic, `u32` version, `u8` dtype
//! (0 single, 1 double), `u64` rows, `u64` cols, then the column-major
//! little-endian payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{Precision, Real};

pub const MAGIC: &[u8; 4] = b"SDMD";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixHeader {
    pub dtype: Precision,
    pub rows: u64,
    pub cols: u64,
}

impl MatrixHeader {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.dtype.dtype_code()])?;
        w.write_all(&self.rows.to_le_bytes())?;
        w.write_all(&self.cols.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut buf = [0u8; 25];
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::MalformedHeader("file shorter than header".into()),
            _ => e.into(),
        })?;
        if &buf[0..4] != MAGIC {
            return Err(Error::MalformedHeader("bad magic".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        let dtype = match buf[8] {
            0 => Precision::Single,
            1 => Precision::Double,
            d => return Err(Error::MalformedHeader(format!("unknown dtype {d}"))),
        };
        Ok(Self {
            dtype,
            rows: u64::from_le_bytes(buf[9..17].try_into().unwrap()),
            cols: u64::from_le_bytes(buf[17..25].try_into().unwrap()),
        })
    }
}

/// Writes a matrix column by column.
pub struct MatrixWriter<W: Write> {
    inner: W,
    header: MatrixHeader,
    written: u64,
}

impl MatrixWriter<BufWriter<File>> {
    pub fn create(path: &Path, dtype: Precision, rows: u64, cols: u64) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), dtype, rows, cols)
    }
}

impl<W: Write> MatrixWriter<W> {
    pub fn new(mut inner: W, dtype: Precision, rows: u64, cols: u64) -> Result<Self> {
        let header = MatrixHeader { dtype, rows, cols };
        header.write_to(&mut inner)?;
        Ok(Self {
            inner,
            header,
            written: 0,
        })
    }

    pub fn write_column<T: Real>(&mut self, col: &[T]) -> Result<()> {
        if col.len() as u64 != self.header.rows {
            return Err(Error::dims(self.header.rows, col.len()));
        }
        if self.written == self.header.cols {
            return Err(Error::dims(
                format!("{} columns", self.header.cols),
                "one more",
            ));
        }
        let mut bytes = Vec::with_capacity(col.len() * self.header.dtype.size_of());
        for v in col {
            match self.header.dtype {
                Precision::Single => bytes.extend_from_slice(&(v.to_f64() as f32).to_le_bytes()),
                Precision::Double => bytes.extend_from_slice(&v.to_f64().to_le_bytes()),
            }
        }
        self.inner.write_all(&bytes)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.cols {
            return Err(Error::dims(
                format!("{} columns", self.header.cols),
                self.written,
            ));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Reads a matrix one column at a time.
pub struct MatrixReader<R: Read> {
    inner: R,
    header: MatrixHeader,
    read: u64,
}

impl MatrixReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> MatrixReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = MatrixHeader::read_from(&mut inner)?;
        Ok(Self {
            inner,
            header,
            read: 0,
        })
    }

    pub fn header(&self) -> &MatrixHeader {
        &self.header
    }

    /// Next column converted to `T`, or `None` after the last one.
    pub fn next_column<T: Real>(&mut self) -> Option<Result<Vec<T>>> {
        if self.read == self.header.cols {
            return None;
        }
        self.read += 1;
        let rows = self.header.rows as usize;
        let size = self.header.dtype.size_of();
        let mut bytes = vec![0u8; rows * size];
        if let Err(e) = self.inner.read_exact(&mut bytes) {
            return Some(Err(match e.kind() {
                ErrorKind::UnexpectedEof => Error::MalformedHeader(format!(
                    "payload ends inside column {}",
                    self.read - 1
                )),
                _ => e.into(),
            }));
        }
        let col = bytes
            .chunks_exact(size)
            .map(|b| match self.header.dtype {
                Precision::Single => T::from_f64(f32::from_le_bytes(b.try_into().unwrap()) as f64),
                Precision::Double => T::from_f64(f64::from_le_bytes(b.try_into().unwrap())),
            })
            .collect();
        Some(Ok(col))
    }
}

/// Stores all columns of a matrix.
pub fn store_matrix<T: Real>(path: &Path, dtype: Precision, cols: &[Vec<T>]) -> Result<()> {
    let rows = cols.first().map_or(0, |c| c.len());
    let mut w = MatrixWriter::create(path, dtype, rows as u64, cols.len() as u64)?;
    for c in cols {
        w.write_column(c)?;
    }
    w.finish()?;
    Ok(())
}

/// Loads every column; meant for small matrices.
pub fn load_matrix<T: Real>(path: &Path) -> Result<(MatrixHeader, Vec<Vec<T>>)> {
    let mut r = MatrixReader::open(path)?;
    let header = *r.header();
    let mut cols = Vec::new();
    while let Some(c) = r.next_column() {
        cols.push(c?);
    }
    Ok((header, cols))
}

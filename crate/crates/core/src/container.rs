//! Binary gallery container.
//!
//! All integers and floats are little-endian; matrices are stored
//! column-major as IEEE-754 `f64` regardless of the in-memory scalar type.
//!
//! ```text
//! magic            4 bytes  "SRGL"
//! version          u8       = 1
//! rows a, cols b   u32, u32 preprocessing target dims
//! equalize         u8       0 | 1
//! standardize      u8       0 | 1
//! class count C    u32
//! C class records:
//!   class_id       u32
//!   label          u32 byte length + UTF-8 bytes
//!   a, b           u32, u32
//!   N              u32      columns of Q (T = a·b rows)
//!   rank           u32
//!   perturbed      u8       0 | 1
//!   seed           u64      perturbation seed (0 when not perturbed)
//!   has_pinv       u8       0 | 1
//!   Q              T·N f64
//!   pinv           N·T f64  only when has_pinv = 1
//! ```

use std::io::{Read, Write};

use crate::classifier::Gallery;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::PreprocessConfig;
use crate::regression::Regressor;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SRGL";
pub const FORMAT_VERSION: u8 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn put_u32<W: Write>(w: &mut W, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn put_matrix<S: Scalar, W: Write>(w: &mut W, m: &Matrix<S>) -> Result<()> {
    let mut buf = Vec::with_capacity(m.as_slice().len() * 8);
    for v in m.as_slice() {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn write_gallery<S: Scalar, W: Write>(gallery: &Gallery<S>, mut w: W) -> Result<()> {
    let cfg = gallery.preprocess_config();
    let (a, b) = cfg.target_dims;
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&[FORMAT_VERSION]).map_err(io_err)?;
    put_u32(&mut w, a, "rows")?;
    put_u32(&mut w, b, "cols")?;
    w.write_all(&[u8::from(cfg.equalize), u8::from(cfg.standardize)]).map_err(io_err)?;
    put_u32(&mut w, gallery.num_classes(), "class count")?;

    for (reg, label) in gallery.regressors().iter().zip(gallery.labels()) {
        w.write_all(&reg.class_id().to_le_bytes()).map_err(io_err)?;
        put_u32(&mut w, label.len(), "label length")?;
        w.write_all(label.as_bytes()).map_err(io_err)?;
        put_u32(&mut w, a, "rows")?;
        put_u32(&mut w, b, "cols")?;
        put_u32(&mut w, reg.cols(), "N")?;
        put_u32(&mut w, reg.rank(), "rank")?;
        w.write_all(&[u8::from(reg.is_perturbed())]).map_err(io_err)?;
        w.write_all(&reg.perturbation_seed().unwrap_or(0).to_le_bytes()).map_err(io_err)?;
        w.write_all(&[u8::from(reg.pinv().is_some())]).map_err(io_err)?;
        put_matrix(&mut w, reg.matrix())?;
        if let Some(p) = reg.pinv() {
            put_matrix(&mut w, p)?;
        }
    }
    w.flush().map_err(io_err)
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut buf = [0u8; K];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("{what} flag must be 0 or 1, got {v}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn matrix<S: Scalar>(&mut self, rows: usize, cols: usize) -> Result<Matrix<S>> {
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        let mut raw = Vec::new();
        (&mut self.inner).take(len as u64).read_to_end(&mut raw).map_err(io_err)?;
        if raw.len() != len {
            return Err(Error::Format(format!("truncated matrix: expected {len} bytes, got {}", raw.len())));
        }
        let data = raw
            .chunks_exact(8)
            .map(|c| {
                let v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
                S::from_f64(v).ok_or_else(|| Error::Format(format!("value {v} not representable")))
            })
            .collect::<Result<Vec<S>>>()?;
        Matrix::from_col_major(rows, cols, data)
    }
}

pub fn read_gallery<S: Scalar, R: Read>(r: R) -> Result<Gallery<S>> {
    let mut rd = Reader { inner: r };
    if &rd.bytes::<4>()? != MAGIC {
        return Err(Error::Format("bad magic, not a gallery container".into()));
    }
    let version = rd.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let a = rd.usize()?;
    let b = rd.usize()?;
    let equalize = rd.flag("equalize")?;
    let standardize = rd.flag("standardize")?;
    let cfg = PreprocessConfig { target_dims: (a, b), equalize, standardize };
    cfg.validate()?;
    let classes = rd.usize()?;

    let mut regressors = Vec::with_capacity(classes.min(4096));
    let mut labels = Vec::with_capacity(classes.min(4096));
    for _ in 0..classes {
        let class_id = rd.u32()?;
        let label_len = rd.usize()?;
        let mut label = vec![0u8; label_len.min(1 << 20)];
        if label.len() != label_len {
            return Err(Error::Format(format!("label length {label_len} is implausible")));
        }
        rd.inner.read_exact(&mut label).map_err(io_err)?;
        let label = String::from_utf8(label).map_err(|e| Error::Format(e.to_string()))?;
        let (ca, cb) = (rd.usize()?, rd.usize()?);
        if (ca, cb) != (a, b) {
            return Err(Error::Format(format!("class {class_id} dims {ca}x{cb} differ from header {a}x{b}")));
        }
        let n = rd.usize()?;
        let rank = rd.usize()?;
        let perturbed = rd.flag("perturbed")?;
        let seed = rd.u64()?;
        let has_pinv = rd.flag("has_pinv")?;
        let t = a * b;
        let q = rd.matrix::<S>(t, n)?;
        let pinv = if has_pinv { Some(rd.matrix::<S>(n, t)?) } else { None };
        regressors.push(Regressor::from_parts(class_id, q, rank, pinv, perturbed.then_some(seed))?);
        labels.push(label);
    }
    let mut trailing = [0u8; 1];
    if rd.inner.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::Format("trailing bytes after last class".into()));
    }
    Gallery::new(regressors, labels, cfg)
}

pub fn to_bytes<S: Scalar>(gallery: &Gallery<S>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_gallery(gallery, &mut out)?;
    Ok(out)
}

pub fn from_bytes<S: Scalar>(bytes: &[u8]) -> Result<Gallery<S>> {
    read_gallery(bytes)
}

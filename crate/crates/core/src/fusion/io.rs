//! `FTOY` tensor files: per tensor a little-endian header (magic `FTOY`,
//! version, rank, dims) followed by the float64 row-major payload. A bundle
//! is several tensors back to back.

use std::io::{Read, Write};

use super::mat::Mat;
use super::params::Parameters;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTOY";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::param(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_mat(m: &Mat) -> Self {
        Self {
            dims: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }

    pub fn into_mat(self) -> Result<Mat> {
        match self.dims[..] {
            [rows, cols] => Mat::from_vec(rows, cols, self.data),
            _ => Err(Error::MalformedTensor(format!(
                "expected a matrix, found dims {:?}",
                self.dims
            ))),
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::MalformedTensor(e.to_string())
}

pub fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 4 * t.dims.len() + 8 * t.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| Error::param(format!("dimension {d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads one tensor; `Ok(None)` at a clean end of input.
pub fn read_tensor(r: &mut impl Read) -> Result<Option<Tensor>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut magic[got..]).map_err(io_err)?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(Error::MalformedTensor("truncated header".into()));
        }
        got += n;
    }
    if &magic != MAGIC {
        return Err(Error::MalformedTensor(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::MalformedTensor(format!(
            "unsupported version {version}"
        )));
    }
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(Error::MalformedTensor(format!("rank {rank} too large")));
    }
    let dims = (0..rank)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::MalformedTensor("element count overflows".into()))?;
    let mut bytes = Vec::new();
    r.take(8 * n as u64)
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    if bytes.len() != 8 * n {
        return Err(Error::MalformedTensor(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            8 * n
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Some(Tensor { dims, data }))
}

pub fn write_bundle(w: &mut impl Write, tensors: &[Tensor]) -> Result<()> {
    tensors.iter().try_for_each(|t| write_tensor(w, t))
}

pub fn read_bundle(r: &mut impl Read) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    while let Some(t) = read_tensor(r)? {
        out.push(t);
    }
    Ok(out)
}

/// All parameter tensors in canonical order.
pub fn export_parameters<P: Parameters + Clone>(p: &P) -> Vec<Tensor> {
    let mut out = Vec::new();
    p.clone().visit(&mut |shape, _, values| {
        out.push(Tensor {
            dims: shape.to_vec(),
            data: values.to_vec(),
        })
    });
    out
}

/// Overwrites the parameters of `p` with `tensors`; shapes must match the
/// canonical order exactly.
pub fn import_parameters<P: Parameters>(p: &mut P, tensors: &[Tensor]) -> Result<()> {
    let mut idx = 0;
    let mut failure = None;
    p.visit(&mut |shape, _, values| {
        if failure.is_some() {
            return;
        }
        match tensors.get(idx) {
            Some(t) if t.dims == shape => values.copy_from_slice(&t.data),
            Some(t) => {
                failure = Some(format!(
                    "tensor {idx}: expected dims {shape:?}, found {:?}",
                    t.dims
                ));
            }
            None => failure = Some(format!("bundle ends before tensor {idx}")),
        }
        idx += 1;
    });
    if let Some(msg) = failure {
        return Err(Error::MalformedTensor(msg));
    }
    if idx != tensors.len() {
        return Err(Error::MalformedTensor(format!(
            "bundle has {} tensors, parameters need {idx}",
            tensors.len()
        )));
    }
    Ok(())
}

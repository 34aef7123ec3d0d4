//! `F3DT` binary tensor files.
//!
//! ```text
//! "F3DT" | version u8 = 1 | dtype u8 (0 = i64, 1 = f64) | rank u8
//!        | rank × u32 LE extents | elements LE, row-major
//! ```
//!
//! Rank 3 is a [`Tensor3`], rank 4 a [`ChannelVolume`] (`c, d, h, w`) and
//! rank 5 a [`WeightBank`] (`c_out, c_in, k, k, k`).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{F3dcError, Result};
use crate::oracle::WeightBank;
use crate::tensor::{ChannelVolume, DType, Scalar, Tensor3};

pub const MAGIC: &[u8; 4] = b"F3DT";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorPayload {
    I64(Vec<i64>),
    F64(Vec<f64>),
}

impl TensorPayload {
    pub fn dtype(&self) -> DType {
        match self {
            TensorPayload::I64(_) => DType::I64,
            TensorPayload::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorPayload::I64(v) => v.len(),
            TensorPayload::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Element types that can be stored in a tensor file.
pub trait FileScalar: Scalar {
    fn wrap(data: Vec<Self>) -> TensorPayload;
    fn unwrap(payload: &TensorPayload) -> Option<&[Self]>;
}

impl FileScalar for i64 {
    fn wrap(data: Vec<Self>) -> TensorPayload {
        TensorPayload::I64(data)
    }
    fn unwrap(payload: &TensorPayload) -> Option<&[Self]> {
        match payload {
            TensorPayload::I64(v) => Some(v),
            TensorPayload::F64(_) => None,
        }
    }
}

impl FileScalar for f64 {
    fn wrap(data: Vec<Self>) -> TensorPayload {
        TensorPayload::F64(data)
    }
    fn unwrap(payload: &TensorPayload) -> Option<&[Self]> {
        match payload {
            TensorPayload::F64(v) => Some(v),
            TensorPayload::I64(_) => None,
        }
    }
}

/// An untyped tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub payload: TensorPayload,
}

fn parse_err(offset: usize, msg: impl Into<String>) -> F3dcError {
    F3dcError::TensorParse {
        offset,
        msg: msg.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(parse_err(
                self.pos,
                format!("unexpected end of file reading {what} ({n} bytes needed, {} left)", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, payload: TensorPayload) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(F3dcError::shape("RawTensor::new", format!("dims {dims:?} not encodable")));
        }
        if payload.len() != expected {
            return Err(F3dcError::shape(
                "RawTensor::new",
                format!("{} elements for dims {:?}", payload.len(), dims),
            ));
        }
        Ok(RawTensor { dims, payload })
    }

    pub fn dtype(&self) -> DType {
        self.payload.dtype()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype() as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.payload {
            TensorPayload::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorPayload::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(parse_err(0, format!("bad magic bytes {magic:02x?}, expected \"F3DT\"")));
        }
        let version = cur.take(1, "version")?[0];
        if version != VERSION {
            return Err(parse_err(4, format!("unsupported version {version}")));
        }
        let dtype = match cur.take(1, "dtype")?[0] {
            0 => DType::I64,
            1 => DType::F64,
            other => return Err(parse_err(5, format!("unknown dtype code {other}"))),
        };
        let rank = cur.take(1, "rank")?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let b = cur.take(4, "extent")?;
            dims.push(u32::from_le_bytes(b.try_into().unwrap()) as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| parse_err(7, "element count overflows"))?;
        let body_at = cur.pos;
        let body = cur.take(
            n.checked_mul(8).ok_or_else(|| parse_err(body_at, "element count overflows"))?,
            "elements",
        )?;
        if cur.pos != bytes.len() {
            return Err(parse_err(cur.pos, format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        let words = body.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).unwrap());
        let payload = match dtype {
            DType::I64 => TensorPayload::I64(words.map(i64::from_le_bytes).collect()),
            DType::F64 => TensorPayload::F64(words.map(f64::from_le_bytes).collect()),
        };
        Ok(RawTensor { dims, payload })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    fn typed<T: FileScalar>(&self, rank: usize, what: &'static str) -> Result<&[T]> {
        if self.dims.len() != rank {
            return Err(F3dcError::shape(what, format!("expected rank {rank}, file has rank {}", self.dims.len())));
        }
        T::unwrap(&self.payload).ok_or_else(|| {
            F3dcError::shape(what, format!("expected {} elements, file holds {}", T::DTYPE.name(), self.dtype().name()))
        })
    }

    pub fn to_tensor3<T: FileScalar>(&self) -> Result<Tensor3<T>> {
        let data = self.typed::<T>(3, "to_tensor3")?;
        Tensor3::new([self.dims[0], self.dims[1], self.dims[2]], data.to_vec())
    }

    pub fn to_volume<T: FileScalar>(&self) -> Result<ChannelVolume<T>> {
        let data = self.typed::<T>(4, "to_volume")?;
        ChannelVolume::from_flat(self.dims[0], [self.dims[1], self.dims[2], self.dims[3]], data.to_vec())
    }

    pub fn to_weights<T: FileScalar>(&self) -> Result<WeightBank<T>> {
        let data = self.typed::<T>(5, "to_weights")?;
        let [co, ci, kd, kh, kw] = [self.dims[0], self.dims[1], self.dims[2], self.dims[3], self.dims[4]];
        if kd != kh || kh != kw {
            return Err(F3dcError::shape("to_weights", format!("kernel {kd}x{kh}x{kw} is not cubic")));
        }
        WeightBank::from_flat(co, ci, kd, data.to_vec())
    }
}

impl<T: FileScalar> From<&Tensor3<T>> for RawTensor {
    fn from(t: &Tensor3<T>) -> Self {
        RawTensor {
            dims: t.dims().to_vec(),
            payload: T::wrap(t.data().to_vec()),
        }
    }
}

impl<T: FileScalar> From<&ChannelVolume<T>> for RawTensor {
    fn from(v: &ChannelVolume<T>) -> Self {
        let [d, h, w] = v.dims();
        RawTensor {
            dims: vec![v.num_channels(), d, h, w],
            payload: T::wrap(v.to_flat()),
        }
    }
}

impl<T: FileScalar> From<&WeightBank<T>> for RawTensor {
    fn from(wb: &WeightBank<T>) -> Self {
        let k = wb.k();
        RawTensor {
            dims: vec![wb.c_out(), wb.c_in(), k, k, k],
            payload: T::wrap(wb.to_flat()),
        }
    }
}

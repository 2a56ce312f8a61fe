//! Dense per-vertex / per-edge feature storage.

use std::fmt::Debug;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Floating-point element type of kernels and tensors (`f32` in engines, `f64` in oracles).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Send + Sync + 'static
{
    /// Type UDF arithmetic and reductions are carried out in.
    type Acc: Scalar;

    fn of_f32(x: f32) -> Self;
    fn of_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn widen(self) -> Self::Acc;
    fn narrow(acc: Self::Acc) -> Self;
}

impl Scalar for f32 {
    type Acc = f64;

    #[inline]
    fn widen(self) -> f64 {
        self.into()
    }
    #[inline]
    fn narrow(acc: f64) -> Self {
        acc as f32
    }
    #[inline]
    fn of_f32(x: f32) -> Self {
        x
    }
    #[inline]
    fn of_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self.into()
    }
}

impl Scalar for f64 {
    type Acc = f64;

    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(acc: f64) -> Self {
        acc
    }
    #[inline]
    fn of_f32(x: f32) -> Self {
        x.into()
    }
    #[inline]
    fn of_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Vertex,
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fill {
    Zeros,
    /// Uniform in `[-1, 1)` from a ChaCha8 stream.
    SeededRandom(u64),
}

/// Row-major `rows x prod(shape)` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor<T = f32> {
    rows: usize,
    shape: Vec<usize>,
    data: Vec<T>,
    kind: TensorKind,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn new(rows: usize, shape: &[usize], fill: Fill, kind: TensorKind) -> Result<Self> {
        check_shape(shape)?;
        let len = rows * shape.iter().product::<usize>();
        let data = match fill {
            Fill::Zeros => vec![T::zero(); len],
            Fill::SeededRandom(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len)
                    .map(|_| T::of_f64(rng.gen_range(-1.0..1.0)))
                    .collect()
            }
        };
        Ok(Self {
            rows,
            shape: shape.to_vec(),
            data,
            kind,
        })
    }

    /// Vertex tensor; shorthand for [`FeatureTensor::new`].
    pub fn vertex(rows: usize, shape: &[usize], fill: Fill) -> Result<Self> {
        Self::new(rows, shape, fill, TensorKind::Vertex)
    }

    pub fn from_vec(rows: usize, shape: &[usize], data: Vec<T>, kind: TensorKind) -> Result<Self> {
        check_shape(shape)?;
        let expected = rows * shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                what: "tensor data",
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            rows,
            shape: shape.to_vec(),
            data,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    /// Flattened per-row feature length.
    pub fn row_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    /// Copy of rows `range` as a standalone tensor.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        let w = self.row_len();
        Self {
            rows: range.len(),
            shape: self.shape.clone(),
            data: self.data[range.start * w..range.end * w].to_vec(),
            kind: self.kind,
        }
    }

    /// Stacks tensors with identical trailing shape.
    pub fn concat_rows(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::LengthMismatch {
            what: "tensor parts",
            expected: 1,
            got: 0,
        })?;
        if let Some(bad) = parts.iter().find(|p| p.shape != first.shape) {
            return Err(Error::ShapeMismatch {
                axis: "rows".into(),
                detail: format!("cannot stack {:?} with {:?}", bad.shape, first.shape),
            });
        }
        Ok(Self {
            rows: parts.iter().map(|p| p.rows).sum(),
            shape: first.shape.clone(),
            data: parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
            kind: first.kind,
        })
    }

    pub fn cast<U: Scalar>(&self) -> FeatureTensor<U> {
        FeatureTensor {
            rows: self.rows,
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of_f64(x.as_f64())).collect(),
            kind: self.kind,
        }
    }

    pub fn with_kind(mut self, kind: TensorKind) -> Self {
        self.kind = kind;
        self
    }
}

impl FeatureTensor<f32> {
    /// Raw dump: `u32` rows, `u32` flattened row length, then little-endian `f32` data.
    pub fn write_raw<W: Write>(&self, writer: W) -> Result<()> {
        let to_u32 = |x: usize| {
            u32::try_from(x).map_err(|_| Error::TooLarge(format!("{x} does not fit a u32 header")))
        };
        let mut w = BufWriter::new(writer);
        w.write_all(&to_u32(self.rows)?.to_le_bytes())?;
        w.write_all(&to_u32(self.row_len())?.to_le_bytes())?;
        for &x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_raw<R: Read>(reader: R, kind: TensorKind) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let rows = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word) as usize;
        if width == 0 {
            return Err(Error::ZeroSizeShape(vec![0]));
        }
        let mut data = Vec::with_capacity(rows * width);
        for _ in 0..rows * width {
            r.read_exact(&mut word)?;
            data.push(f32::from_le_bytes(word));
        }
        if r.read(&mut word)? != 0 {
            return Err(Error::Format("trailing bytes after tensor data".into()));
        }
        Self::from_vec(rows, &[width], data, kind)
    }

    pub fn save_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_raw(File::create(path)?)
    }

    pub fn load_raw(path: impl AsRef<Path>, kind: TensorKind) -> Result<Self> {
        Self::read_raw(File::open(path)?, kind)
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::ZeroSizeShape(shape.to_vec()));
    }
    Ok(())
}

/// Contiguous column range `[lo, hi)` of the flattened feature dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureTile {
    pub lo: usize,
    pub hi: usize,
}

impl FeatureTile {
    pub fn width(&self) -> usize {
        self.hi - self.lo
    }

    pub fn range(&self) -> Range<usize> {
        self.lo..self.hi
    }
}

/// Cover of `[0, len)` by tiles of width `tile` (the last one may be narrower).
pub fn tile_ranges(len: usize, tile: usize) -> Vec<FeatureTile> {
    assert!(tile >= 1, "tile factor must be at least 1");
    (0..len)
        .step_by(tile)
        .map(|lo| FeatureTile {
            lo,
            hi: (lo + tile).min(len),
        })
        .collect()
}

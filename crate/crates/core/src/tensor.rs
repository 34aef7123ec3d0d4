//! Dense 3D containers and the primitives the transforms are built from.
//!
//! Layout is row-major `(d, h, w)` with `w` fastest. Element kinds are
//! `i64` and `f64` (see [`Scalar`]). Integer data is expected to originate
//! from at most 16-bit activations and 8-bit weights, which leaves more than
//! 30 bits of headroom in a 64-bit accumulator after three transform stages
//! and channel summation (the exact bound is worked out in [`crate::engine`]).
//!
//! Floating-point reductions in [`mode_product`] always sum in ascending
//! source index, so results do not depend on scheduling.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_rational::Ratio;

use crate::error::{F3dcError, Result};

/// Element type codes shared with the tensor file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    I64 = 0,
    F64 = 1,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::I64 => "i64",
            DType::F64 => "f64",
        }
    }
}

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const DTYPE: DType;
    /// Whether [`Scalar::halve`] is exact for every value.
    const HALVES_EXACTLY: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn halve(self) -> Self;
    /// `None` when the element type cannot carry the rational (e.g. `1/2` as `i64`).
    fn from_ratio(r: Ratio<i64>) -> Option<Self>;
}

impl Scalar for i64 {
    const DTYPE: DType = DType::I64;
    const HALVES_EXACTLY: bool = false;

    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn from_i64(v: i64) -> Self {
        v
    }
    fn halve(self) -> Self {
        debug_assert!(self % 2 == 0, "inexact integer halving of {self}");
        self >> 1
    }
    fn from_ratio(r: Ratio<i64>) -> Option<Self> {
        r.is_integer().then(|| r.to_integer())
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;
    const HALVES_EXACTLY: bool = true;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn halve(self) -> Self {
        self * 0.5
    }
    fn from_ratio(r: Ratio<i64>) -> Option<Self> {
        // exact for the dyadic entries of the shipped transforms, nearest otherwise
        Some(*r.numer() as f64 / *r.denom() as f64)
    }
}

/// A dense `d × h × w` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn new(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(F3dcError::shape(
                "Tensor3::new",
                format!("{} values supplied for dims {:?} ({} expected)", data.len(), dims, len),
            ));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 {
            dims,
            data: vec![T::zero(); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn filled(dims: [usize; 3], v: T) -> Self {
        Tensor3 {
            dims,
            data: vec![v; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn cube(n: usize) -> Self {
        Self::zeros([n, n, n])
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for d in 0..dims[0] {
            for h in 0..dims[1] {
                for w in 0..dims[2] {
                    data.push(f(d, h, w));
                }
            }
        }
        Tensor3 { dims, data }
    }

    pub fn map<U: Scalar>(&self, f: impl FnMut(T) -> U) -> Tensor3<U> {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Reverses all three axes.
    pub fn flipped(&self) -> Self {
        let [d, h, w] = self.dims;
        Self::from_fn(self.dims, |a, b, c| self[[d - 1 - a, h - 1 - b, w - 1 - c]])
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }
}

impl<T> Tensor3<T> {
    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn is_cube(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, [d, h, w]: [usize; 3]) -> usize {
        debug_assert!(
            d < self.dims[0] && h < self.dims[1] && w < self.dims[2],
            "index {:?} out of bounds for dims {:?}",
            [d, h, w],
            self.dims
        );
        (d * self.dims[1] + h) * self.dims[2] + w
    }

    fn strides(&self) -> [usize; 3] {
        [self.dims[1] * self.dims[2], self.dims[2], 1]
    }
}

impl<T> Index<[usize; 3]> for Tensor3<T> {
    type Output = T;
    #[inline]
    fn index(&self, idx: [usize; 3]) -> &T {
        let o = self.offset(idx);
        &self.data[o]
    }
}

impl<T> IndexMut<[usize; 3]> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, idx: [usize; 3]) -> &mut T {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

/// Multi-channel feature map: `c` volumes of identical dims, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVolume<T> {
    dims: [usize; 3],
    channels: Vec<Tensor3<T>>,
}

impl<T: Scalar> ChannelVolume<T> {
    pub fn new(channels: Vec<Tensor3<T>>) -> Result<Self> {
        let dims = match channels.first() {
            Some(c) => c.dims(),
            None => return Err(F3dcError::shape("ChannelVolume::new", "no channels")),
        };
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.dims() != dims) {
            return Err(F3dcError::shape(
                "ChannelVolume::new",
                format!("channel {i} has dims {:?}, channel 0 has {:?}", c.dims(), dims),
            ));
        }
        Ok(ChannelVolume { dims, channels })
    }

    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        ChannelVolume {
            dims,
            channels: (0..channels).map(|_| Tensor3::zeros(dims)).collect(),
        }
    }

    /// Builds from a flat `[c][d][h][w]` buffer.
    pub fn from_flat(channels: usize, dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let per = dims[0] * dims[1] * dims[2];
        if channels == 0 || data.len() != channels * per {
            return Err(F3dcError::shape(
                "ChannelVolume::from_flat",
                format!("{} values for {channels} channels of {:?}", data.len(), dims),
            ));
        }
        let chans = data
            .chunks_exact(per)
            .map(|c| Tensor3 {
                dims,
                data: c.to_vec(),
            })
            .collect();
        Ok(ChannelVolume {
            dims,
            channels: chans,
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.channels.iter().flat_map(|c| c.data().iter().copied()).collect()
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> ChannelVolume<U> {
        ChannelVolume {
            dims: self.dims,
            channels: self.channels.iter().map(|c| c.map(&mut f)).collect(),
        }
    }
}

impl<T> ChannelVolume<T> {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &Tensor3<T> {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut Tensor3<T> {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Tensor3<T>] {
        &self.channels
    }
}

impl ChannelVolume<i64> {
    pub fn to_f64(&self) -> ChannelVolume<f64> {
        self.map(|v| v as f64)
    }
}

impl ChannelVolume<f64> {
    /// Converts back to integers, failing on any non-integral value.
    pub fn to_i64_exact(&self) -> Result<ChannelVolume<i64>> {
        for (ci, c) in self.channels.iter().enumerate() {
            if let Some((i, &v)) = c
                .data()
                .iter()
                .enumerate()
                .find(|(_, v)| v.fract() != 0.0 || v.abs() >= 9.2e18)
            {
                return Err(F3dcError::NotIntegral {
                    value: v,
                    index: ci * c.len() + i,
                });
            }
        }
        Ok(self.map(|v| v as i64))
    }
}

/// Row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix2<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix2<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(F3dcError::shape(
                "Matrix2::new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix2 { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(F3dcError::shape("Matrix2::from_rows", "ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().cloned()).collect();
        Ok(Matrix2 {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Matrix2<U> {
        Matrix2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Matrix2<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T: Scalar> Matrix2<T> {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Matrix2 {
            rows: n,
            cols: n,
            data,
        }
    }
}

/// Applies `f(src_lane, dst_lane)` to every 1D lane of `t` along `mode`,
/// producing a tensor whose extent along `mode` is `out_extent`.
pub(crate) fn map_lanes<T: Scalar>(
    t: &Tensor3<T>,
    mode: usize,
    out_extent: usize,
    mut f: impl FnMut(&[T], &mut [T]),
) -> Tensor3<T> {
    debug_assert!(mode < 3);
    let mut out_dims = t.dims;
    out_dims[mode] = out_extent;
    let mut out = Tensor3::zeros(out_dims);
    let in_strides = t.strides();
    let out_strides = out.strides();
    let (ax1, ax2) = match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let extent = t.dims[mode];
    let mut src = vec![T::zero(); extent];
    let mut dst = vec![T::zero(); out_extent];
    for i in 0..t.dims[ax1] {
        for j in 0..t.dims[ax2] {
            let ib = i * in_strides[ax1] + j * in_strides[ax2];
            for (x, s) in src.iter_mut().enumerate() {
                *s = t.data[ib + x * in_strides[mode]];
            }
            f(&src, &mut dst);
            let ob = i * out_strides[ax1] + j * out_strides[ax2];
            for (a, &v) in dst.iter().enumerate() {
                out.data[ob + a * out_strides[mode]] = v;
            }
        }
    }
    out
}

/// Mode-`mode` product: `out[.., a, ..] = Σ_x m[a, x] · t[.., x, ..]`,
/// summed in ascending `x`.
pub fn mode_product<T: Scalar>(t: &Tensor3<T>, m: &Matrix2<T>, mode: usize) -> Result<Tensor3<T>> {
    if mode > 2 {
        return Err(F3dcError::shape("mode_product", format!("mode {mode} is not an axis of a 3-way tensor")));
    }
    if m.cols() != t.dims[mode] {
        return Err(F3dcError::ModeMismatch {
            op: "mode_product",
            mode,
            expected: m.cols(),
            found: t.dims[mode],
        });
    }
    Ok(map_lanes(t, mode, m.rows(), |src, dst| {
        for (a, out) in dst.iter_mut().enumerate() {
            let row = m.row(a);
            let mut acc = T::zero();
            for (x, &v) in src.iter().enumerate() {
                acc += row[x] * v;
            }
            *out = acc;
        }
    }))
}

/// Zero-pads by `lo` leading and `hi` trailing elements per axis.
pub fn pad3<T: Scalar>(t: &Tensor3<T>, lo: [usize; 3], hi: [usize; 3]) -> Tensor3<T> {
    let dims = [
        t.dims[0] + lo[0] + hi[0],
        t.dims[1] + lo[1] + hi[1],
        t.dims[2] + lo[2] + hi[2],
    ];
    let mut out = Tensor3::zeros(dims);
    for d in 0..t.dims[0] {
        for h in 0..t.dims[1] {
            let src = t.offset([d, h, 0]);
            let dst = out.offset([d + lo[0], h + lo[1], lo[2]]);
            let n = t.dims[2];
            out.data[dst..dst + n].copy_from_slice(&t.data[src..src + n]);
        }
    }
    out
}

/// Removes `lo` leading and `hi` trailing elements per axis.
pub fn crop3<T: Scalar>(t: &Tensor3<T>, lo: [usize; 3], hi: [usize; 3]) -> Result<Tensor3<T>> {
    let mut dims = [0; 3];
    for a in 0..3 {
        dims[a] = t.dims[a].checked_sub(lo[a] + hi[a]).ok_or_else(|| {
            F3dcError::shape(
                "crop3",
                format!("cannot remove {} elements from extent {} on axis {a}", lo[a] + hi[a], t.dims[a]),
            )
        })?;
    }
    Ok(Tensor3::from_fn(dims, |d, h, w| t[[d + lo[0], h + lo[1], w + lo[2]]]))
}

fn check_same(op: &'static str, a: [usize; 3], b: [usize; 3]) -> Result<()> {
    if a != b {
        return Err(F3dcError::shape(op, format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Element-wise product.
pub fn ewmul<T: Scalar>(a: &Tensor3<T>, b: &Tensor3<T>) -> Result<Tensor3<T>> {
    check_same("ewmul", a.dims, b.dims)?;
    Ok(Tensor3 {
        dims: a.dims,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| x * y).collect(),
    })
}

/// `acc += t`, element-wise.
pub fn add_assign<T: Scalar>(acc: &mut Tensor3<T>, t: &Tensor3<T>) -> Result<()> {
    check_same("add_assign", acc.dims, t.dims)?;
    for (a, &v) in acc.data.iter_mut().zip(&t.data) {
        *a += v;
    }
    Ok(())
}

/// `acc += a ⊙ b`, returning the number of multiplies performed.
pub fn mul_add_assign<T: Scalar>(acc: &mut Tensor3<T>, a: &Tensor3<T>, b: &Tensor3<T>) -> Result<u64> {
    check_same("mul_add_assign", acc.dims, a.dims)?;
    check_same("mul_add_assign", a.dims, b.dims)?;
    for ((o, &x), &y) in acc.data.iter_mut().zip(&a.data).zip(&b.data) {
        *o += x * y;
    }
    Ok(a.data.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> Tensor3<i64> {
        let mut n = 0;
        Tensor3::from_fn(dims, |_, _, _| {
            n += 1;
            n - 1
        })
    }

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor3::<i64>::new([2, 2, 2], vec![0; 7]).is_err());
        assert!(Tensor3::<i64>::new([2, 2, 2], vec![0; 8]).is_ok());
    }

    #[test]
    fn layout_is_w_fastest() {
        let t = ramp([3, 3, 3]);
        assert_eq!(t[[1, 2, 0]], 9 + 6);
        assert_eq!(t[[0, 0, 2]], 2);
    }

    #[test]
    fn mode_product_identity_is_noop() {
        let t = ramp([2, 3, 4]);
        for mode in 0..3 {
            let id = Matrix2::identity(t.dims()[mode]);
            assert_eq!(mode_product(&t, &id, mode).unwrap(), t);
        }
    }

    #[test]
    fn mode_product_zero_tensor() {
        let t = Tensor3::<i64>::cube(3);
        let m = Matrix2::new(5, 3, (1..=15).collect()).unwrap();
        let out = mode_product(&t, &m, 0).unwrap();
        assert_eq!(out.dims(), [5, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn mode_product_upper_triangular_on_ones() {
        let t = Tensor3::<i64>::filled([2, 2, 2], 1);
        let m = Matrix2::from_rows(&[[1, 1], [0, 1]]).unwrap();
        let out = mode_product(&t, &m, 0).unwrap();
        for h in 0..2 {
            for w in 0..2 {
                assert_eq!(out[[0, h, w]], 2);
                assert_eq!(out[[1, h, w]], 1);
            }
        }
    }

    #[test]
    fn mode_product_rejects_mismatch_and_names_mode() {
        let t = Tensor3::<i64>::zeros([2, 3, 4]);
        let m = Matrix2::<i64>::identity(2);
        let err = mode_product(&t, &m, 2).unwrap_err();
        match err {
            F3dcError::ModeMismatch { mode, expected, found, .. } => {
                assert_eq!((mode, expected, found), (2, 2, 4));
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err_string(&t, &m).contains("mode 1"));
    }

    fn err_string(t: &Tensor3<i64>, m: &Matrix2<i64>) -> String {
        mode_product(t, m, 1).unwrap_err().to_string()
    }

    #[test]
    fn pad_single_voxel() {
        let t = Tensor3::new([1, 1, 1], vec![5i64]).unwrap();
        let p = pad3(&t, [1, 1, 1], [0, 0, 0]);
        assert_eq!(p.dims(), [2, 2, 2]);
        assert_eq!(p[[1, 1, 1]], 5);
        assert_eq!(p.sum(), 5);
    }

    #[test]
    fn pad_zero_offsets_is_identity() {
        let t = ramp([2, 3, 2]);
        assert_eq!(pad3(&t, [0; 3], [0; 3]), t);
    }

    #[test]
    fn pad_asymmetric_preserves_sum() {
        let t = Tensor3::<i64>::filled([2, 2, 2], 1);
        let p = pad3(&t, [0, 0, 1], [1, 0, 0]);
        assert_eq!(p.dims(), [3, 2, 3]);
        assert_eq!(p.sum(), 8);
    }

    #[test]
    fn crop_ramp_corner() {
        let t = ramp([3, 3, 3]);
        let c = crop3(&t, [1, 1, 1], [0, 0, 0]).unwrap();
        assert_eq!(c.dims(), [2, 2, 2]);
        assert_eq!(c[[0, 0, 0]], 13);
    }

    #[test]
    fn crop_of_zero_is_zero_and_overcrop_fails() {
        let z = Tensor3::<i64>::cube(4);
        let c = crop3(&z, [1, 0, 2], [1, 1, 0]).unwrap();
        assert_eq!(c.dims(), [2, 3, 2]);
        assert_eq!(c.sum(), 0);
        assert!(crop3(&z, [3, 0, 0], [2, 0, 0]).is_err());
    }

    #[test]
    fn ewmul_cases() {
        let x = ramp([2, 2, 2]);
        let ones = Tensor3::filled([2, 2, 2], 1);
        assert_eq!(ewmul(&ones, &x).unwrap(), x);
        assert_eq!(ewmul(&Tensor3::cube(2), &x).unwrap(), Tensor3::cube(2));
        let sq = ewmul(&x, &x).unwrap();
        for (i, &v) in sq.data().iter().enumerate() {
            assert_eq!(v, (i * i) as i64);
        }
        assert!(ewmul(&x, &Tensor3::cube(3)).is_err());
    }

    #[test]
    fn add_assign_cases() {
        let x = ramp([2, 2, 2]);
        let mut acc = x.clone();
        add_assign(&mut acc, &Tensor3::cube(2)).unwrap();
        assert_eq!(acc, x);
        let mut acc = Tensor3::cube(2);
        add_assign(&mut acc, &x).unwrap();
        assert_eq!(acc, x);
        let mut ones = Tensor3::filled([2, 2, 2], 1i64);
        add_assign(&mut ones, &Tensor3::filled([2, 2, 2], 1)).unwrap();
        assert!(ones.data().iter().all(|&v| v == 2));
        assert!(add_assign(&mut ones, &Tensor3::cube(1)).is_err());
    }

    #[test]
    fn channel_volume_rejects_mixed_dims() {
        let r = ChannelVolume::new(vec![Tensor3::<i64>::cube(2), Tensor3::cube(3)]);
        assert!(r.is_err());
        let v = ChannelVolume::from_flat(2, [1, 1, 2], vec![1i64, 2, 3, 4]).unwrap();
        assert_eq!(v.channel(1).data(), &[3, 4]);
        assert_eq!(v.to_flat(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn exact_integer_conversion() {
        let v = ChannelVolume::from_flat(1, [1, 1, 2], vec![1.0, -3.0]).unwrap();
        assert_eq!(v.to_i64_exact().unwrap().to_flat(), vec![1, -3]);
        let bad = ChannelVolume::from_flat(1, [1, 1, 2], vec![1.0, 0.5]).unwrap();
        assert!(bad.to_i64_exact().is_err());
    }

    #[test]
    fn from_ratio_by_element_type() {
        assert_eq!(f64::from_ratio(Ratio::new(-1, 2)), Some(-0.5));
        assert_eq!(i64::from_ratio(Ratio::new(4, 2)), Some(2));
        assert_eq!(i64::from_ratio(Ratio::new(1, 2)), None);
    }
}

//! Brute-force 3D transposed convolution.
//!
//! Two independent formulations that must agree exactly:
//!
//! * [`deconv3d_zim`] materializes the zero-inserted, re-padded input and runs a
//!   stride-1 convolution with the kernel reversed along all three axes.
//! * [`deconv3d_iom`] scatters `v · kernel` for every input voxel into the
//!   output window starting at `j·s − p`.
//!
//! Both are deliberately naive. Volumes are cubic.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{F3dcError, Result};
use crate::tensor::{ChannelVolume, Scalar, Tensor3};

/// Per-axis sizes of a transposed convolution: input `i`, kernel `k`,
/// stride `s`, padding `p` and the resulting output `o = (i−1)s + k − 2p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeconvGeometry {
    i: usize,
    k: usize,
    s: usize,
    p: usize,
    o: usize,
}

impl DeconvGeometry {
    pub fn new(i: usize, k: usize, s: usize, p: usize) -> Result<Self> {
        if k == 0 || s == 0 || i == 0 {
            return Err(F3dcError::Geometry(format!("i={i}, k={k}, s={s} must all be at least 1")));
        }
        if p >= k {
            return Err(F3dcError::Geometry(format!("padding p={p} must be smaller than kernel k={k}")));
        }
        let full = (i - 1) * s + k;
        if full <= 2 * p {
            return Err(F3dcError::Geometry(format!(
                "output size (i-1)s + k - 2p = {full} - {} is not positive",
                2 * p
            )));
        }
        Ok(DeconvGeometry {
            i,
            k,
            s,
            p,
            o: full - 2 * p,
        })
    }

    pub fn i(&self) -> usize {
        self.i
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn o(&self) -> usize {
        self.o
    }

    /// Transposed padding `k − p − 1`.
    pub fn p_t(&self) -> usize {
        self.k - self.p - 1
    }
}

/// Zero-insertion parameters for running a deconvolution as a plain
/// stride-1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZimPlan {
    /// Size after inserting `s − 1` zeros between samples.
    pub i_t: usize,
    pub p_t: usize,
    pub k_t: usize,
    pub s_t: usize,
    pub o_t: usize,
}

/// Forward convolution output size `⌊(i + 2p − k)/s⌋ + 1`.
pub fn conv_out_size(i: usize, k: usize, s: usize, p: usize) -> Result<usize> {
    if s == 0 || k == 0 {
        return Err(F3dcError::Geometry(format!("k={k}, s={s} must be at least 1")));
    }
    if i + 2 * p < k {
        return Err(F3dcError::Geometry(format!(
            "window k={k} exceeds padded input i + 2p = {}",
            i + 2 * p
        )));
    }
    Ok((i + 2 * p - k) / s + 1)
}

pub fn zim_plan(geom: &DeconvGeometry) -> Result<ZimPlan> {
    let (i, k, s, p) = (geom.i, geom.k, geom.s, geom.p);
    if p >= k {
        return Err(F3dcError::Geometry(format!("p={p} >= k={k} makes the transposed padding negative")));
    }
    let i_t = i + (s - 1) * (i - 1);
    let p_t = k - p - 1;
    let o_t = conv_out_size(i_t, k, 1, p_t)?;
    debug_assert_eq!(o_t, geom.o);
    Ok(ZimPlan {
        i_t,
        p_t,
        k_t: k,
        s_t: 1,
        o_t,
    })
}

static NEXT_BANK_ID: AtomicU64 = AtomicU64::new(1);

/// `c_out × c_in` cubic kernels, laid out `[co][ci][d][h][w]`.
///
/// Banks are immutable once built; each construction gets a fresh id that
/// the engine uses to key its transformed-weight cache.
#[derive(Debug, Clone)]
pub struct WeightBank<T> {
    c_out: usize,
    c_in: usize,
    k: usize,
    kernels: Vec<Tensor3<T>>,
    id: u64,
}

impl<T: Scalar> WeightBank<T> {
    /// `kernels[co * c_in + ci]`
    pub fn new(c_out: usize, c_in: usize, kernels: Vec<Tensor3<T>>) -> Result<Self> {
        if c_out == 0 || c_in == 0 || kernels.len() != c_out * c_in {
            return Err(F3dcError::shape(
                "WeightBank::new",
                format!("{} kernels for {c_out}x{c_in} channels", kernels.len()),
            ));
        }
        let k = kernels[0].dims()[0];
        if let Some(bad) = kernels.iter().find(|g| g.dims() != [k, k, k]) {
            return Err(F3dcError::shape(
                "WeightBank::new",
                format!("kernel dims {:?} differ from {k}^3", bad.dims()),
            ));
        }
        Ok(WeightBank {
            c_out,
            c_in,
            k,
            kernels,
            id: NEXT_BANK_ID.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn from_flat(c_out: usize, c_in: usize, k: usize, data: Vec<T>) -> Result<Self> {
        let per = k * k * k;
        if per == 0 || data.len() != c_out * c_in * per {
            return Err(F3dcError::shape(
                "WeightBank::from_flat",
                format!("{} values for {c_out}x{c_in} kernels of {k}^3", data.len()),
            ));
        }
        let kernels = data
            .chunks_exact(per)
            .map(|c| Tensor3::new([k, k, k], c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(c_out, c_in, kernels)
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.kernels.iter().flat_map(|g| g.data().iter().copied()).collect()
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> WeightBank<U> {
        WeightBank {
            c_out: self.c_out,
            c_in: self.c_in,
            k: self.k,
            kernels: self.kernels.iter().map(|g| g.map(&mut f)).collect(),
            id: NEXT_BANK_ID.fetch_add(1, Ordering::Relaxed),
        }
    }
}

impl<T> WeightBank<T> {
    pub fn c_out(&self) -> usize {
        self.c_out
    }
    pub fn c_in(&self) -> usize {
        self.c_in
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kernel(&self, co: usize, ci: usize) -> &Tensor3<T> {
        &self.kernels[co * self.c_in + ci]
    }

    pub fn kernels(&self) -> &[Tensor3<T>] {
        &self.kernels
    }
}

impl WeightBank<i64> {
    pub fn to_f64(&self) -> WeightBank<f64> {
        self.map(|v| v as f64)
    }
}

pub(crate) fn check_layer_inputs<T: Scalar>(
    op: &'static str,
    input: &ChannelVolume<T>,
    w: &WeightBank<T>,
    geom: &DeconvGeometry,
) -> Result<()> {
    let i = geom.i;
    if input.dims() != [i, i, i] {
        return Err(F3dcError::shape(op, format!("input dims {:?}, geometry expects {i}^3", input.dims())));
    }
    if input.num_channels() != w.c_in {
        return Err(F3dcError::shape(
            op,
            format!("input has {} channels, weights expect {}", input.num_channels(), w.c_in),
        ));
    }
    if w.k != geom.k {
        return Err(F3dcError::shape(op, format!("kernel size {} vs geometry k={}", w.k, geom.k)));
    }
    Ok(())
}

/// Zero-insertion method: dilate by `s`, pad by `p_t`, then a stride-1
/// correlation with the all-axes-reversed kernel.
pub fn deconv3d_zim<T: Scalar>(
    input: &ChannelVolume<T>,
    w: &WeightBank<T>,
    geom: &DeconvGeometry,
) -> Result<ChannelVolume<T>> {
    check_layer_inputs("deconv3d_zim", input, w, geom)?;
    let plan = zim_plan(geom)?;
    let (k, s) = (geom.k, geom.s);
    let zn = plan.i_t + 2 * plan.p_t;

    let inserted: Vec<Tensor3<T>> = input
        .channels()
        .iter()
        .map(|x| {
            let mut z = Tensor3::cube(zn);
            for d in 0..geom.i {
                for h in 0..geom.i {
                    for ww in 0..geom.i {
                        z[[plan.p_t + d * s, plan.p_t + h * s, plan.p_t + ww * s]] = x[[d, h, ww]];
                    }
                }
            }
            z
        })
        .collect();

    let o = plan.o_t;
    let mut out = Vec::with_capacity(w.c_out);
    for co in 0..w.c_out {
        let mut y = Tensor3::cube(o);
        for (ci, z) in inserted.iter().enumerate() {
            let g = w.kernel(co, ci).flipped();
            for od in 0..o {
                for oh in 0..o {
                    for ow in 0..o {
                        let mut acc = T::zero();
                        for a in 0..k {
                            for b in 0..k {
                                for c in 0..k {
                                    acc += z[[od + a, oh + b, ow + c]] * g[[a, b, c]];
                                }
                            }
                        }
                        y[[od, oh, ow]] += acc;
                    }
                }
            }
        }
        out.push(y);
    }
    ChannelVolume::new(out)
}

/// Input-oriented mapping: each voxel `x[j]` adds `x[j] · g` at output
/// offset `j·s − p`, clipped to the output grid.
pub fn deconv3d_iom<T: Scalar>(
    input: &ChannelVolume<T>,
    w: &WeightBank<T>,
    geom: &DeconvGeometry,
) -> Result<ChannelVolume<T>> {
    check_layer_inputs("deconv3d_iom", input, w, geom)?;
    let (i, k, s, p, o) = (geom.i, geom.k, geom.s, geom.p as isize, geom.o as isize);
    let mut out = Vec::with_capacity(w.c_out);
    for co in 0..w.c_out {
        let mut y = Tensor3::cube(geom.o);
        for (ci, x) in input.channels().iter().enumerate() {
            let g = w.kernel(co, ci);
            for jd in 0..i {
                for jh in 0..i {
                    for jw in 0..i {
                        let v = x[[jd, jh, jw]];
                        let base = [
                            (jd * s) as isize - p,
                            (jh * s) as isize - p,
                            (jw * s) as isize - p,
                        ];
                        for a in 0..k {
                            let od = base[0] + a as isize;
                            if od < 0 || od >= o {
                                continue;
                            }
                            for b in 0..k {
                                let oh = base[1] + b as isize;
                                if oh < 0 || oh >= o {
                                    continue;
                                }
                                for c in 0..k {
                                    let ow = base[2] + c as isize;
                                    if ow < 0 || ow >= o {
                                        continue;
                                    }
                                    y[[od as usize, oh as usize, ow as usize]] += v * g[[a, b, c]];
                                }
                            }
                        }
                    }
                }
            }
        }
        out.push(y);
    }
    ChannelVolume::new(out)
}

//! Single-tile fast transposed convolution.
//!
//! A [`TransformSet`] carries three matrices: the kernel transform `H`
//! (`E_r × k`), the input transform `Pᵀ` (`E_r × I_r`) and the output
//! transform `Aᵀ` (`O_r × E_r`). One tile of output is
//!
//! ```text
//! Y = Aᵀ ×₀,₁,₂ [ (H ×₀,₁,₂ g) ⊙ (Pᵀ ×₀,₁,₂ d) ]
//! ```
//!
//! where `×₀,₁,₂` is the mode product along all three axes. The shipped set
//! produces a `6³` output block of a `k = 4, s = 2` transposed convolution
//! from a `5³` input window with `8³ = 512` multiplies, instead of
//! `6³ · 64 / 8 = 1728` useful MACs for the direct method.
//!
//! Matrix entries are exact rationals. Before use they are compiled into a
//! [`ShiftAddMatrix`], where entries in `{±1, ±2, ±½}` become add, subtract,
//! double or halve operations; only other values fall back to a generic
//! multiply.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{F3dcError, Result};
use crate::tensor::{map_lanes, Matrix2, Scalar, Tensor3};

pub type Rational = Ratio<i64>;

/// A complete fast-deconvolution instance for one `(k, s, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSet {
    r: usize,
    k: usize,
    s: usize,
    input_tile: usize,
    transformed_tile: usize,
    output_tile: usize,
    kernel_matrix: Matrix2<Rational>,
    input_matrix: Matrix2<Rational>,
    output_matrix: Matrix2<Rational>,
    flip_kernel: bool,
    phase: usize,
    fingerprint: u64,
}

/// Tile sizes `(I_r, E_r, O_r)` for a transform of order `r`.
pub fn tile_sizes(k: usize, s: usize, r: usize) -> (usize, usize, usize) {
    let input = (k + r * s - 1).div_ceil(s);
    let transformed = k + (r - 1) * s;
    let output = s * r;
    (input, transformed, output)
}

impl TransformSet {
    /// Validates matrix shapes against the tile-size formulas.
    ///
    /// `phase` is the value of `(k − p − 1) mod s` the matrices were derived
    /// for; `flip_kernel` reverses kernels before the kernel transform.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: usize,
        k: usize,
        s: usize,
        kernel_matrix: Matrix2<Rational>,
        input_matrix: Matrix2<Rational>,
        output_matrix: Matrix2<Rational>,
        flip_kernel: bool,
        phase: usize,
    ) -> Result<Self> {
        if r == 0 || k == 0 || s == 0 {
            return Err(F3dcError::TransformMismatch(format!("r={r}, k={k}, s={s} must be at least 1")));
        }
        if phase >= s {
            return Err(F3dcError::TransformMismatch(format!("phase {phase} must be below s={s}")));
        }
        let (i_r, e_r, o_r) = tile_sizes(k, s, r);
        let check = |name: &str, m: &Matrix2<Rational>, rows: usize, cols: usize| {
            if m.rows() != rows || m.cols() != cols {
                Err(F3dcError::TransformMismatch(format!(
                    "{name} is {}x{}, expected {rows}x{cols} for k={k}, s={s}, r={r}",
                    m.rows(),
                    m.cols()
                )))
            } else {
                Ok(())
            }
        };
        check("H", &kernel_matrix, e_r, k)?;
        check("Pt", &input_matrix, e_r, i_r)?;
        check("At", &output_matrix, o_r, e_r)?;

        let mut hasher = DefaultHasher::new();
        (r, k, s, flip_kernel, phase).hash(&mut hasher);
        kernel_matrix.hash(&mut hasher);
        input_matrix.hash(&mut hasher);
        output_matrix.hash(&mut hasher);

        Ok(TransformSet {
            r,
            k,
            s,
            input_tile: i_r,
            transformed_tile: e_r,
            output_tile: o_r,
            kernel_matrix,
            input_matrix,
            output_matrix,
            flip_kernel,
            phase,
            fingerprint: hasher.finish(),
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn s(&self) -> usize {
        self.s
    }
    /// Input window width `I_r`.
    pub fn input_tile(&self) -> usize {
        self.input_tile
    }
    /// Transformed-domain width `E_r`.
    pub fn transformed_tile(&self) -> usize {
        self.transformed_tile
    }
    /// Output block width `O_r`.
    pub fn output_tile(&self) -> usize {
        self.output_tile
    }
    /// `H`, `E_r × k`.
    pub fn kernel_matrix(&self) -> &Matrix2<Rational> {
        &self.kernel_matrix
    }
    /// `Pᵀ`, `E_r × I_r`.
    pub fn input_matrix(&self) -> &Matrix2<Rational> {
        &self.input_matrix
    }
    /// `Aᵀ`, `O_r × E_r`.
    pub fn output_matrix(&self) -> &Matrix2<Rational> {
        &self.output_matrix
    }
    pub fn flip_kernel(&self) -> bool {
        self.flip_kernel
    }
    pub fn phase(&self) -> usize {
        self.phase
    }
    /// Content hash, stable within a process.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// EWMM multiplies per tile per channel pair, `E_r³`.
    pub fn multiplies_per_tile(&self) -> u64 {
        (self.transformed_tile as u64).pow(3)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_text(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "r = {}", self.r);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "phase = {}", self.phase);
        let _ = writeln!(out, "flip_kernel = {}", self.flip_kernel);
        for (name, m) in [
            ("H", &self.kernel_matrix),
            ("Pt", &self.input_matrix),
            ("At", &self.output_matrix),
        ] {
            let _ = writeln!(out, "\n[{name} {}x{}]", m.rows(), m.cols());
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }
}

fn rat_rows(rows: &[&[i64]], den: i64) -> Matrix2<Rational> {
    let rows: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| r.iter().map(|&n| Ratio::new(n, den)).collect())
        .collect();
    Matrix2::from_rows(&rows).expect("static matrix is rectangular")
}

/// The order-3 set for `k = 4, s = 2` (`I_r = 5, E_r = 8, O_r = 6`).
///
/// Calibrated against the reference oracles: kernels enter `H` unreversed,
/// and the set applies to paddings with `(k − p − 1) mod 2 = 0`.
pub fn builtin_t3_k4_s2() -> TransformSet {
    #[rustfmt::skip]
    let h = rat_rows(&[
        &[0, 0, 0, 2],
        &[0, 1, 0, 1],
        &[0, -1, 0, 1],
        &[0, 2, 0, 0],
        &[0, 0, 2, 0],
        &[1, 0, 1, 0],
        &[-1, 0, 1, 0],
        &[2, 0, 0, 0],
    ], 2);
    #[rustfmt::skip]
    let pt = rat_rows(&[
        &[1, 0, -1, 0, 0],
        &[0, 1, 1, 0, 0],
        &[0, -1, 1, 0, 0],
        &[0, -1, 0, 1, 0],
        &[0, 1, 0, -1, 0],
        &[0, 0, 1, 1, 0],
        &[0, 0, -1, 1, 0],
        &[0, 0, -1, 0, 1],
    ], 1);
    #[rustfmt::skip]
    let at = rat_rows(&[
        &[1, 1, 1, 0, 0, 0, 0, 0],
        &[0, 0, 0, 0, 1, 1, 1, 0],
        &[0, 1, -1, 0, 0, 0, 0, 0],
        &[0, 0, 0, 0, 0, 1, -1, 0],
        &[0, 1, 1, 1, 0, 0, 0, 0],
        &[0, 0, 0, 0, 0, 1, 1, 1],
    ], 1);
    TransformSet::new(3, 4, 2, h, pt, at, false, 0).expect("built-in set is well formed")
}

fn parse_text(text: &str) -> Result<TransformSet> {
    let err = |line: usize, msg: String| F3dcError::TransformParse { line, msg };
    let mut r = None;
    let mut k = None;
    let mut s = None;
    let mut phase = 0usize;
    let mut flip = false;
    let mut mats: Vec<(String, usize, usize, Vec<Rational>, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("unterminated header {line:?}")))?;
            let mut parts = header.split_whitespace();
            let name = parts.next().unwrap_or("").to_string();
            let shape = parts
                .next()
                .ok_or_else(|| err(line_no, "matrix header needs a ROWSxCOLS shape".into()))?;
            let (rows, cols) = shape
                .split_once('x')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| err(line_no, format!("bad matrix shape {shape:?}")))?;
            if !["H", "Pt", "At"].contains(&name.as_str()) {
                return Err(err(line_no, format!("unknown matrix {name:?} (expected H, Pt or At)")));
            }
            if mats.iter().any(|m| m.0 == name) {
                return Err(err(line_no, format!("matrix {name} given twice")));
            }
            mats.push((name, rows, cols, Vec::new(), line_no));
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if !mats.is_empty() {
                return Err(err(line_no, "scalar keys must precede the matrices".into()));
            }
            let value = value.trim();
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|e| err(line_no, format!("{}: {e}", key.trim())))
            };
            match key.trim() {
                "r" => r = Some(num()?),
                "k" => k = Some(num()?),
                "s" => s = Some(num()?),
                "phase" => phase = num()?,
                "flip_kernel" => {
                    flip = value
                        .parse()
                        .map_err(|_| err(line_no, format!("flip_kernel must be true or false, got {value:?}")))?
                }
                other => return Err(err(line_no, format!("unknown key {other:?}"))),
            }
            continue;
        }
        let Some(current) = mats.last_mut() else {
            return Err(err(line_no, format!("unexpected line {line:?}")));
        };
        let row = line
            .split_whitespace()
            .map(|tok| Rational::from_str(tok).map_err(|_| err(line_no, format!("bad rational {tok:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != current.2 {
            return Err(err(line_no, format!("row has {} entries, {} expects {}", row.len(), current.0, current.2)));
        }
        if current.3.len() == current.1 * current.2 {
            return Err(err(line_no, format!("too many rows for {}", current.0)));
        }
        current.3.extend(row);
    }

    let missing = |what: &str| err(0, format!("missing {what}"));
    let (r, k, s) = (r.ok_or_else(|| missing("r"))?, k.ok_or_else(|| missing("k"))?, s.ok_or_else(|| missing("s"))?);
    let mut take = |name: &str| -> Result<Matrix2<Rational>> {
        let pos = mats
            .iter()
            .position(|m| m.0 == name)
            .ok_or_else(|| missing(&format!("matrix {name}")))?;
        let (_, rows, cols, data, line) = mats.remove(pos);
        if data.len() != rows * cols {
            return Err(err(line, format!("{name} declares {rows} rows but has {}", data.len() / cols.max(1))));
        }
        Matrix2::new(rows, cols, data)
    };
    let h = take("H")?;
    let pt = take("Pt")?;
    let at = take("At")?;
    TransformSet::new(r, k, s, h, pt, at, flip, phase)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op<T> {
    Add,
    Sub,
    AddDouble,
    SubDouble,
    AddHalf,
    SubHalf,
    Scale(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term<T> {
    col: usize,
    op: Op<T>,
}

/// A matrix lowered to per-row lists of add/subtract/shift terms.
#[derive(Debug, Clone)]
pub struct ShiftAddMatrix<T> {
    rows: usize,
    cols: usize,
    terms: Vec<Vec<Term<T>>>,
}

impl<T: Scalar> ShiftAddMatrix<T> {
    /// Compiles `scale · m` for element type `T`.
    pub fn compile(m: &Matrix2<Rational>, scale: i64) -> Result<Self> {
        let scale = Rational::from_integer(scale);
        let two = Rational::from_integer(2);
        let half = Rational::new(1, 2);
        let mut terms = Vec::with_capacity(m.rows());
        for r in 0..m.rows() {
            let mut row = Vec::new();
            for (c, v) in m.row(r).iter().enumerate() {
                let v = *v * scale;
                let op = if v.is_zero() {
                    continue;
                } else if v.is_one() {
                    Op::Add
                } else if v == -Rational::one() {
                    Op::Sub
                } else if v == two {
                    Op::AddDouble
                } else if v == -two {
                    Op::SubDouble
                } else if T::HALVES_EXACTLY && v == half {
                    Op::AddHalf
                } else if T::HALVES_EXACTLY && v == -half {
                    Op::SubHalf
                } else {
                    Op::Scale(T::from_ratio(v).ok_or_else(|| F3dcError::NotRepresentable {
                        value: v.to_string(),
                        row: r,
                        col: c,
                        dtype: T::DTYPE.name(),
                    })?)
                };
                row.push(Term { col: c, op });
            }
            terms.push(row);
        }
        Ok(ShiftAddMatrix {
            rows: m.rows(),
            cols: m.cols(),
            terms,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entries that could not be lowered to add/shift form.
    pub fn generic_multiplies(&self) -> usize {
        self.terms
            .iter()
            .flatten()
            .filter(|t| matches!(t.op, Op::Scale(_)))
            .count()
    }

    #[inline]
    fn apply_lane(&self, src: &[T], dst: &mut [T]) {
        for (out, row) in dst.iter_mut().zip(&self.terms) {
            let mut acc = T::zero();
            for t in row {
                let x = src[t.col];
                acc = match t.op {
                    Op::Add => acc + x,
                    Op::Sub => acc - x,
                    Op::AddDouble => acc + (x + x),
                    Op::SubDouble => acc - (x + x),
                    Op::AddHalf => acc + x.halve(),
                    Op::SubHalf => acc - x.halve(),
                    Op::Scale(m) => acc + m * x,
                };
            }
            *out = acc;
        }
    }

    /// Mode product along all three axes, in order 0, 1, 2.
    pub fn apply3(&self, t: &Tensor3<T>, op: &'static str) -> Result<Tensor3<T>> {
        for (mode, &extent) in t.dims().iter().enumerate() {
            if extent != self.cols {
                return Err(F3dcError::ModeMismatch {
                    op,
                    mode,
                    expected: self.cols,
                    found: extent,
                });
            }
        }
        let a = map_lanes(t, 0, self.rows, |s, d| self.apply_lane(s, d));
        let b = map_lanes(&a, 1, self.rows, |s, d| self.apply_lane(s, d));
        Ok(map_lanes(&b, 2, self.rows, |s, d| self.apply_lane(s, d)))
    }
}

/// Which operand of the element-wise product a tile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Kernel,
    Input,
    Product,
}

/// An `E_r³` cube in the transformed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedTile<T> {
    tile: Tensor3<T>,
    domain: Domain,
}

impl<T: Scalar> TransformedTile<T> {
    fn new(tile: Tensor3<T>, domain: Domain) -> Self {
        debug_assert!(tile.is_cube());
        TransformedTile { tile, domain }
    }

    pub fn zeros(e_r: usize, domain: Domain) -> Self {
        Self::new(Tensor3::cube(e_r), domain)
    }

    pub fn tile(&self) -> &Tensor3<T> {
        &self.tile
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn into_tensor(self) -> Tensor3<T> {
        self.tile
    }

    /// Element-wise product of a kernel-domain and an input-domain tile.
    pub fn ewmm(kernel: &Self, input: &Self) -> Result<Self> {
        if kernel.domain != Domain::Kernel || input.domain != Domain::Input {
            return Err(F3dcError::shape(
                "ewmm",
                format!("operands are {:?} and {:?}, expected Kernel and Input", kernel.domain, input.domain),
            ));
        }
        Ok(Self::new(crate::tensor::ewmul(&kernel.tile, &input.tile)?, Domain::Product))
    }

    /// `self += kernel ⊙ input`; `self` must be a product-domain accumulator.
    pub fn accumulate_ewmm(&mut self, kernel: &Self, input: &Self) -> Result<u64> {
        debug_assert_eq!(self.domain, Domain::Product);
        debug_assert_eq!(kernel.domain, Domain::Kernel);
        debug_assert_eq!(input.domain, Domain::Input);
        crate::tensor::mul_add_assign(&mut self.tile, &kernel.tile, &input.tile)
    }

    pub fn product(tile: Tensor3<T>) -> Result<Self> {
        if !tile.is_cube() {
            return Err(F3dcError::shape("TransformedTile::product", format!("dims {:?} are not cubic", tile.dims())));
        }
        Ok(Self::new(tile, Domain::Product))
    }
}

/// A [`TransformSet`] lowered for element type `T`.
///
/// `kernel_scale` multiplies `H` before lowering; the integer path uses 2 so
/// that every `±½` entry becomes `±1`, making transformed kernels `scale³`
/// times their true value.
#[derive(Debug, Clone)]
pub struct CompiledTransform<T> {
    kernel: ShiftAddMatrix<T>,
    input: ShiftAddMatrix<T>,
    output: ShiftAddMatrix<T>,
    kernel_scale: i64,
    flip_kernel: bool,
}

impl<T: Scalar> CompiledTransform<T> {
    pub fn new(ts: &TransformSet, kernel_scale: i64) -> Result<Self> {
        Ok(CompiledTransform {
            kernel: ShiftAddMatrix::compile(ts.kernel_matrix(), kernel_scale)?,
            input: ShiftAddMatrix::compile(ts.input_matrix(), 1)?,
            output: ShiftAddMatrix::compile(ts.output_matrix(), 1)?,
            kernel_scale,
            flip_kernel: ts.flip_kernel(),
        })
    }

    pub fn kernel_scale(&self) -> i64 {
        self.kernel_scale
    }

    /// Total generic multiplies across all three lowered matrices.
    pub fn generic_multiplies(&self) -> usize {
        self.kernel.generic_multiplies() + self.input.generic_multiplies() + self.output.generic_multiplies()
    }

    pub fn kernel(&self, g: &Tensor3<T>) -> Result<TransformedTile<T>> {
        let tile = if self.flip_kernel {
            self.kernel.apply3(&g.flipped(), "transform_kernel")?
        } else {
            self.kernel.apply3(g, "transform_kernel")?
        };
        Ok(TransformedTile::new(tile, Domain::Kernel))
    }

    pub fn input(&self, d: &Tensor3<T>) -> Result<TransformedTile<T>> {
        Ok(TransformedTile::new(self.input.apply3(d, "transform_input")?, Domain::Input))
    }

    pub fn inverse(&self, e: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.output.apply3(e, "inverse_transform")
    }

    pub fn tile(&self, g: &Tensor3<T>, d: &Tensor3<T>) -> Result<Tensor3<T>> {
        let prod = TransformedTile::ewmm(&self.kernel(g)?, &self.input(d)?)?;
        self.inverse(prod.tile())
    }
}

/// `H ×₀,₁,₂ g`, with `g` reversed first when the set asks for it.
pub fn transform_kernel<T: Scalar>(g: &Tensor3<T>, ts: &TransformSet) -> Result<TransformedTile<T>> {
    CompiledTransform::new(ts, 1)?.kernel(g)
}

/// `Pᵀ ×₀,₁,₂ d` for an `I_r³` input window.
pub fn transform_input<T: Scalar>(d: &Tensor3<T>, ts: &TransformSet) -> Result<TransformedTile<T>> {
    CompiledTransform::new(ts, 1)?.input(d)
}

/// `Aᵀ ×₀,₁,₂ e`, mapping an `E_r³` product tile to an `O_r³` output block.
pub fn inverse_transform<T: Scalar>(e: &Tensor3<T>, ts: &TransformSet) -> Result<Tensor3<T>> {
    CompiledTransform::new(ts, 1)?.inverse(e)
}

/// One output block: `Aᵀ[(H g) ⊙ (Pᵀ d)]` along all three axes.
pub fn f3dc_tile<T: Scalar>(g: &Tensor3<T>, d: &Tensor3<T>, ts: &TransformSet) -> Result<Tensor3<T>> {
    CompiledTransform::new(ts, 1)?.tile(g, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes_and_sizes() {
        let ts = builtin_t3_k4_s2();
        assert_eq!((ts.r(), ts.k(), ts.s()), (3, 4, 2));
        assert_eq!(ts.input_tile(), 5);
        assert_eq!(ts.transformed_tile(), 8);
        assert_eq!(ts.output_tile(), 6);
        assert_eq!((ts.kernel_matrix().rows(), ts.kernel_matrix().cols()), (8, 4));
        assert_eq!((ts.input_matrix().rows(), ts.input_matrix().cols()), (8, 5));
        assert_eq!((ts.output_matrix().rows(), ts.output_matrix().cols()), (6, 8));
        assert_eq!(ts.multiplies_per_tile(), 512);
        assert!(!ts.flip_kernel());
    }

    #[test]
    fn builtin_h_rows_match_published_values() {
        let ts = builtin_t3_k4_s2();
        let h = |n: i64, d: i64| Ratio::new(n, d);
        let z = h(0, 1);
        let expect = [
            [z, z, z, h(1, 1)],
            [z, h(1, 2), z, h(1, 2)],
            [z, h(-1, 2), z, h(1, 2)],
            [z, h(1, 1), z, z],
            [z, z, h(1, 1), z],
            [h(1, 2), z, h(1, 2), z],
            [h(-1, 2), z, h(1, 2), z],
            [h(1, 1), z, z, z],
        ];
        for (r, row) in expect.iter().enumerate() {
            assert_eq!(ts.kernel_matrix().row(r), row);
        }
    }

    #[test]
    fn builtin_entries_are_shift_add_only() {
        let ts = builtin_t3_k4_s2();
        let all = ts
            .kernel_matrix()
            .data()
            .iter()
            .chain(ts.input_matrix().data())
            .chain(ts.output_matrix().data());
        for v in all {
            assert!([0, 1, -1, 2, -2].contains(&(*v * 2).to_integer()) && (*v * 2).is_integer());
        }
        assert_eq!(CompiledTransform::<f64>::new(&ts, 1).unwrap().generic_multiplies(), 0);
        assert_eq!(CompiledTransform::<i64>::new(&ts, 2).unwrap().generic_multiplies(), 0);
    }

    #[test]
    fn unscaled_builtin_is_not_integer_representable() {
        let ts = builtin_t3_k4_s2();
        assert!(matches!(
            CompiledTransform::<i64>::new(&ts, 1),
            Err(F3dcError::NotRepresentable { .. })
        ));
    }

    #[test]
    fn inverse_of_ones_is_row_sum_outer_product() {
        let ts = builtin_t3_k4_s2();
        let y = inverse_transform(&Tensor3::<f64>::filled([8, 8, 8], 1.0), &ts).unwrap();
        let sums = [3.0, 3.0, 0.0, 0.0, 3.0, 3.0];
        assert_eq!(y.dims(), [6, 6, 6]);
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..6 {
                    assert_eq!(y[[a, b, c]], sums[a] * sums[b] * sums[c]);
                }
            }
        }
    }

    #[test]
    fn zero_operands_give_zero_tiles() {
        let ts = builtin_t3_k4_s2();
        let g = Tensor3::<f64>::cube(4);
        let d = Tensor3::<f64>::filled([5, 5, 5], 3.0);
        assert!(transform_kernel(&g, &ts).unwrap().tile().data().iter().all(|&v| v == 0.0));
        assert!(transform_input(&Tensor3::<f64>::cube(5), &ts).unwrap().tile().data().iter().all(|&v| v == 0.0));
        let y = f3dc_tile(&g, &d, &ts).unwrap();
        assert_eq!(y.dims(), [6, 6, 6]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors_name_the_stage() {
        let ts = builtin_t3_k4_s2();
        let e = transform_kernel(&Tensor3::<f64>::cube(5), &ts).unwrap_err();
        assert!(e.to_string().contains("transform_kernel"));
        assert!(transform_input(&Tensor3::<f64>::cube(4), &ts).is_err());
        assert!(inverse_transform(&Tensor3::<f64>::zeros([8, 8, 7]), &ts).is_err());
    }

    #[test]
    fn ewmm_checks_domains() {
        let k = TransformedTile::<f64>::zeros(8, Domain::Kernel);
        let i = TransformedTile::<f64>::zeros(8, Domain::Input);
        assert!(TransformedTile::ewmm(&k, &i).is_ok());
        assert!(TransformedTile::ewmm(&i, &k).is_err());
        assert_eq!(TransformedTile::ewmm(&k, &i).unwrap().domain(), Domain::Product);
    }

    #[test]
    fn text_round_trip() {
        let ts = builtin_t3_k4_s2();
        let text = ts.to_text();
        assert!(text.contains("1/2"));
        let back = TransformSet::from_text(&text).unwrap();
        assert_eq!(back, ts);
        assert_eq!(back.fingerprint(), ts.fingerprint());
    }

    #[test]
    fn text_validation() {
        let good = builtin_t3_k4_s2().to_text();
        // wrong r: shapes no longer match the tile formulas
        let bad = good.replacen("r = 3", "r = 2", 1);
        assert!(matches!(TransformSet::from_text(&bad), Err(F3dcError::TransformMismatch(_))));
        let bad = good.replacen("0 0 0 1\n", "0 0 0 x\n", 1);
        match TransformSet::from_text(&bad) {
            Err(F3dcError::TransformParse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let bad = good.replacen("[At 6x8]", "[Bt 6x8]", 1);
        assert!(TransformSet::from_text(&bad).is_err());
        let truncated: String = good.lines().take(good.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(TransformSet::from_text(&truncated).is_err());
        assert!(TransformSet::from_text("k = 4\ns = 2\n").is_err());
    }

    #[test]
    fn fingerprint_distinguishes_flip() {
        let a = builtin_t3_k4_s2();
        let text = a.to_text().replace("flip_kernel = false", "flip_kernel = true");
        let b = TransformSet::from_text(&text).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}

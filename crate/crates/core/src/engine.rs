//! Full-layer fast transposed convolution.
//!
//! The output grid is cut into `O_r³` blocks. Block `t` (per axis) reads the
//! `I_r`-wide input window starting at `r·t − ⌊p_t/s⌋`, where out-of-range
//! samples read as zero, and the trailing overhang past `o` is discarded.
//!
//! Dataflow is weight stationary: every kernel is transformed once; input
//! windows are transformed once per `(tile, ci)`; then for each output
//! channel and tile (`co → tile_d → tile_h → tile_w`) the `ci` products are
//! accumulated in the `E_r³` domain and inverse-transformed once. Work
//! items are `(co, tile)` pairs with private accumulators, so results are
//! bit-identical for any thread count.
//!
//! # Integer path
//!
//! [`F3dcEngine::deconv_quant`] scales `H` by 2 so its `±½` entries become
//! `±1`; transformed kernels are then `2³ = 8` times their true value and
//! everything downstream stays in `i64`. For 16-bit activations and 8-bit
//! weights with the shipped set, per-axis absolute row sums are at most 2
//! (`2H`), 2 (`Pᵀ`) and 3 (`Aᵀ`), so
//!
//! ```text
//! |kernel'| ≤ 2^7 · 2³ = 2^10      |input'| ≤ 2^15 · 2³ = 2^18
//! |Σ_ci product| ≤ c_in · 2^28      |output| ≤ 27 · c_in · 2^28 < c_in · 2^33
//! ```
//!
//! which leaves 64-bit accumulation safe for `c_in < 2^30`. Debug and test
//! builds trap on overflow regardless.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{F3dcError, Result};
use crate::oracle::{check_layer_inputs, DeconvGeometry, WeightBank};
use crate::tensor::{ChannelVolume, Scalar, Tensor3};
use crate::transform::{CompiledTransform, Domain, TransformSet, TransformedTile};

/// Shape of one transposed-convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub geom: DeconvGeometry,
}

impl LayerSpec {
    pub fn new(c_in: usize, c_out: usize, i: usize, k: usize, s: usize, p: usize) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return Err(F3dcError::Geometry(format!("channel counts {c_in}->{c_out} must be positive")));
        }
        Ok(LayerSpec {
            c_in,
            c_out,
            geom: DeconvGeometry::new(i, k, s, p)?,
        })
    }
}

/// Per-axis mapping between output blocks and input windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TilePlan {
    pub tiles_per_axis: usize,
    /// `I_r`
    pub input_tile: usize,
    /// `O_r`
    pub output_tile: usize,
    /// Input advance per tile, `r`.
    pub step: usize,
    /// `⌊p_t / s⌋`, how far the first window starts before index 0.
    pub halo_shift: usize,
    pub input_size: usize,
    pub output_size: usize,
    /// Trailing outputs discarded per axis, `t_n·O_r − o`.
    pub crop: usize,
}

impl TilePlan {
    pub fn input_start(&self, t: usize) -> isize {
        (self.step * t) as isize - self.halo_shift as isize
    }

    pub fn output_start(&self, t: usize) -> usize {
        self.output_tile * t
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_per_axis.pow(3)
    }

    /// Outputs along one axis before cropping.
    pub fn padded_output(&self) -> usize {
        self.tiles_per_axis * self.output_tile
    }
}

pub fn plan_tiles(layer: &LayerSpec, ts: &TransformSet) -> Result<TilePlan> {
    let g = &layer.geom;
    if ts.k() != g.k() || ts.s() != g.s() {
        return Err(F3dcError::TransformMismatch(format!(
            "transform set is for k={}, s={}, layer has k={}, s={}",
            ts.k(),
            ts.s(),
            g.k(),
            g.s()
        )));
    }
    let p_t = g.p_t();
    let phase = p_t % g.s();
    if phase != ts.phase() {
        return Err(F3dcError::Phase {
            expected: ts.phase(),
            found: phase,
        });
    }
    let o = g.o();
    let o_r = ts.output_tile();
    let t_n = o.div_ceil(o_r);
    Ok(TilePlan {
        tiles_per_axis: t_n,
        input_tile: ts.input_tile(),
        output_tile: o_r,
        step: ts.r(),
        halo_shift: p_t / g.s(),
        input_size: g.i(),
        output_size: o,
        crop: t_n * o_r - o,
    })
}

/// Bit widths for the integer path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    pub activation_bits: u32,
    pub weight_bits: u32,
    /// Per-axis factor applied to `H`.
    pub kernel_scale: i64,
    pub accumulator_bits: u32,
}

impl Default for QuantSpec {
    fn default() -> Self {
        QuantSpec {
            activation_bits: 16,
            weight_bits: 8,
            kernel_scale: 2,
            accumulator_bits: 64,
        }
    }
}

impl QuantSpec {
    /// Factor by which integer-path outputs exceed the true result.
    pub fn divisor(&self) -> i64 {
        self.kernel_scale.pow(3)
    }

    fn check_width(what: &'static str, bits: u32, values: impl Iterator<Item = i64>) -> Result<()> {
        let lo = -(1i64 << (bits - 1));
        let hi = (1i64 << (bits - 1)) - 1;
        for (index, value) in values.enumerate() {
            if value < lo || value > hi {
                return Err(F3dcError::Width {
                    what,
                    bits,
                    value,
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn check_activations(&self, x: &ChannelVolume<i64>) -> Result<()> {
        Self::check_width(
            "activation",
            self.activation_bits,
            x.channels().iter().flat_map(|c| c.data().iter().copied()),
        )
    }

    pub fn check_weights(&self, w: &WeightBank<i64>) -> Result<()> {
        Self::check_width(
            "weight",
            self.weight_bits,
            w.kernels().iter().flat_map(|g| g.data().iter().copied()),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    /// Element-wise multiplies actually executed.
    pub ewmm_multiplies: u64,
    pub tiles: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuantStats {
    pub engine: EngineStats,
    /// Pre-shift output values checked for divisibility.
    pub checked_values: u64,
    pub max_abs_preshift: i64,
}

/// Multiply accounting for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplyCount {
    pub total: u64,
    /// Per channel pair over the uncropped `(t_n·O_r)³` grid; equals `μ`.
    pub per_output: Ratio<i64>,
    /// Per channel pair over the `o³` outputs actually kept.
    pub per_valid_output: Ratio<i64>,
    /// `per_valid_output − per_output`, zero when nothing is cropped.
    pub boundary_overhead: Ratio<i64>,
    /// Zero-insertion multiplies per output per channel pair, `k³`.
    pub zim_per_output: u64,
}

pub fn count_multiplies(layer: &LayerSpec, ts: &TransformSet) -> Result<MultiplyCount> {
    let plan = plan_tiles(layer, ts)?;
    let per_pair = plan.tile_count() as u64 * ts.multiplies_per_tile();
    let total = per_pair * (layer.c_in * layer.c_out) as u64;
    let per_output = Ratio::new(per_pair as i64, plan.padded_output().pow(3) as i64);
    let per_valid_output = Ratio::new(per_pair as i64, plan.output_size.pow(3) as i64);
    Ok(MultiplyCount {
        total,
        per_output,
        per_valid_output,
        boundary_overhead: per_valid_output - per_output,
        zim_per_output: (layer.geom.k() as u64).pow(3),
    })
}

fn extract_window<T: Scalar>(x: &Tensor3<T>, plan: &TilePlan, tile: [usize; 3]) -> Tensor3<T> {
    let n = plan.input_tile;
    let size = plan.input_size as isize;
    let start = tile.map(|t| plan.input_start(t));
    let mut win = Tensor3::cube(n);
    for a in 0..n {
        let d = start[0] + a as isize;
        if d < 0 || d >= size {
            continue;
        }
        for b in 0..n {
            let h = start[1] + b as isize;
            if h < 0 || h >= size {
                continue;
            }
            for c in 0..n {
                let w = start[2] + c as isize;
                if w < 0 || w >= size {
                    continue;
                }
                win[[a, b, c]] = x[[d as usize, h as usize, w as usize]];
            }
        }
    }
    win
}

type CacheKey = (u64, u64, i64);

/// Runs layers with a fixed worker count and caches transformed weights.
pub struct F3dcEngine {
    pool: Option<rayon::ThreadPool>,
    threads: usize,
    float_weights: Mutex<HashMap<CacheKey, Arc<Vec<TransformedTile<f64>>>>>,
    int_weights: Mutex<HashMap<CacheKey, Arc<Vec<TransformedTile<i64>>>>>,
    quant: QuantSpec,
}

impl std::fmt::Debug for F3dcEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("F3dcEngine")
            .field("threads", &self.threads)
            .field("quant", &self.quant)
            .finish_non_exhaustive()
    }
}

impl F3dcEngine {
    /// An engine with its own pool of `threads` workers (`0` means the
    /// rayon global pool).
    pub fn new(threads: usize) -> Result<Self> {
        let pool = if threads == 0 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| F3dcError::Geometry(format!("cannot start {threads} worker threads: {e}")))?,
            )
        };
        Ok(F3dcEngine {
            pool,
            threads,
            float_weights: Mutex::default(),
            int_weights: Mutex::default(),
            quant: QuantSpec::default(),
        })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn quant_spec(&self) -> QuantSpec {
        self.quant
    }

    /// Number of transformed weight banks currently held.
    pub fn cached_weight_sets(&self) -> usize {
        self.float_weights.lock().unwrap().len() + self.int_weights.lock().unwrap().len()
    }

    pub fn clear_cache(&self) {
        self.float_weights.lock().unwrap().clear();
        self.int_weights.lock().unwrap().clear();
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    fn transformed_weights<T: Scalar>(
        &self,
        cache: &Mutex<HashMap<CacheKey, Arc<Vec<TransformedTile<T>>>>>,
        w: &WeightBank<T>,
        ts: &TransformSet,
        compiled: &CompiledTransform<T>,
    ) -> Result<Arc<Vec<TransformedTile<T>>>> {
        let key = (w.id(), ts.fingerprint(), compiled.kernel_scale());
        if let Some(hit) = cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let tiles = self.install(|| {
            w.kernels()
                .par_iter()
                .map(|g| compiled.kernel(g))
                .collect::<Result<Vec<_>>>()
        })?;
        let tiles = Arc::new(tiles);
        cache.lock().unwrap().insert(key, Arc::clone(&tiles));
        Ok(tiles)
    }

    fn check_layer<T: Scalar>(
        op: &'static str,
        input: &ChannelVolume<T>,
        w: &WeightBank<T>,
        layer: &LayerSpec,
    ) -> Result<()> {
        check_layer_inputs(op, input, w, &layer.geom)?;
        if input.num_channels() != layer.c_in || w.c_out() != layer.c_out {
            return Err(F3dcError::shape(
                op,
                format!(
                    "layer is {}->{} channels, tensors are {}->{}",
                    layer.c_in,
                    layer.c_out,
                    input.num_channels(),
                    w.c_out()
                ),
            ));
        }
        Ok(())
    }

    fn run<T: Scalar>(
        &self,
        input: &ChannelVolume<T>,
        kernels: &[TransformedTile<T>],
        compiled: &CompiledTransform<T>,
        plan: &TilePlan,
        layer: &LayerSpec,
    ) -> Result<(ChannelVolume<T>, EngineStats)> {
        let t_n = plan.tiles_per_axis;
        let n_tiles = plan.tile_count();
        let (c_in, c_out) = (layer.c_in, layer.c_out);
        let e_r = kernels[0].tile().dims()[0];
        let tile_coord = |t: usize| [t / (t_n * t_n), (t / t_n) % t_n, t % t_n];

        // pre-process: every (tile, ci) input window, shared by all co
        let inputs: Vec<Vec<TransformedTile<T>>> = self.install(|| {
            (0..n_tiles)
                .into_par_iter()
                .map(|t| {
                    input
                        .channels()
                        .iter()
                        .map(|x| compiled.input(&extract_window(x, plan, tile_coord(t))))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;

        // co → tile_d → tile_h → tile_w, accumulating over ci
        let blocks: Vec<(Tensor3<T>, u64)> = self.install(|| {
            (0..c_out * n_tiles)
                .into_par_iter()
                .map(|item| {
                    let (co, t) = (item / n_tiles, item % n_tiles);
                    let mut acc = TransformedTile::zeros(e_r, Domain::Product);
                    let mut mults = 0;
                    for ci in 0..c_in {
                        mults += acc.accumulate_ewmm(&kernels[co * c_in + ci], &inputs[t][ci])?;
                    }
                    Ok((compiled.inverse(acc.tile())?, mults))
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let o = plan.output_size;
        let o_r = plan.output_tile;
        let mut out = ChannelVolume::zeros(c_out, [o; 3]);
        let mut ewmm_multiplies = 0;
        for (item, (block, mults)) in blocks.into_iter().enumerate() {
            ewmm_multiplies += mults;
            let (co, t) = (item / n_tiles, item % n_tiles);
            let base = tile_coord(t).map(|c| plan.output_start(c));
            let extent = base.map(|b| o_r.min(o - b));
            let dst = out.channel_mut(co);
            for a in 0..extent[0] {
                for b in 0..extent[1] {
                    for c in 0..extent[2] {
                        dst[[base[0] + a, base[1] + b, base[2] + c]] = block[[a, b, c]];
                    }
                }
            }
        }
        Ok((
            out,
            EngineStats {
                ewmm_multiplies,
                tiles: n_tiles,
            },
        ))
    }

    pub fn deconv_with_stats(
        &self,
        input: &ChannelVolume<f64>,
        w: &WeightBank<f64>,
        layer: &LayerSpec,
        ts: &TransformSet,
    ) -> Result<(ChannelVolume<f64>, EngineStats)> {
        Self::check_layer("deconv3d_f3dc", input, w, layer)?;
        let plan = plan_tiles(layer, ts)?;
        let compiled = CompiledTransform::<f64>::new(ts, 1)?;
        let kernels = self.transformed_weights(&self.float_weights, w, ts, &compiled)?;
        self.run(input, &kernels, &compiled, &plan, layer)
    }

    pub fn deconv(
        &self,
        input: &ChannelVolume<f64>,
        w: &WeightBank<f64>,
        layer: &LayerSpec,
        ts: &TransformSet,
    ) -> Result<ChannelVolume<f64>> {
        self.deconv_with_stats(input, w, layer, ts).map(|(y, _)| y)
    }

    pub fn deconv_quant_with_stats(
        &self,
        input: &ChannelVolume<i64>,
        w: &WeightBank<i64>,
        layer: &LayerSpec,
        ts: &TransformSet,
    ) -> Result<(ChannelVolume<i64>, QuantStats)> {
        Self::check_layer("deconv3d_f3dc_quant", input, w, layer)?;
        self.quant.check_activations(input)?;
        self.quant.check_weights(w)?;
        let plan = plan_tiles(layer, ts)?;
        let compiled = CompiledTransform::<i64>::new(ts, self.quant.kernel_scale)?;
        let kernels = self.transformed_weights(&self.int_weights, w, ts, &compiled)?;
        let (mut y, engine) = self.run(input, &kernels, &compiled, &plan, layer)?;

        let divisor = self.quant.divisor();
        let mut stats = QuantStats {
            engine,
            ..QuantStats::default()
        };
        for co in 0..y.num_channels() {
            for (index, v) in y.channel_mut(co).data_mut().iter_mut().enumerate() {
                if *v % divisor != 0 {
                    return Err(F3dcError::Divisibility {
                        value: *v,
                        divisor,
                        channel: co,
                        index,
                    });
                }
                stats.checked_values += 1;
                stats.max_abs_preshift = stats.max_abs_preshift.max(v.abs());
                *v /= divisor;
            }
        }
        Ok((y, stats))
    }

    pub fn deconv_quant(
        &self,
        input: &ChannelVolume<i64>,
        w: &WeightBank<i64>,
        layer: &LayerSpec,
        ts: &TransformSet,
    ) -> Result<ChannelVolume<i64>> {
        self.deconv_quant_with_stats(input, w, layer, ts).map(|(y, _)| y)
    }
}

/// Fast layer in the floating-point path, on the rayon global pool.
pub fn deconv3d_f3dc(
    input: &ChannelVolume<f64>,
    w: &WeightBank<f64>,
    layer: &LayerSpec,
    ts: &TransformSet,
) -> Result<ChannelVolume<f64>> {
    F3dcEngine::new(0)?.deconv(input, w, layer, ts)
}

/// Fast layer in 16/8-bit integers with 64-bit accumulation.
pub fn deconv3d_f3dc_quant(
    input: &ChannelVolume<i64>,
    w: &WeightBank<i64>,
    layer: &LayerSpec,
    ts: &TransformSet,
) -> Result<ChannelVolume<i64>> {
    F3dcEngine::new(0)?.deconv_quant(input, w, layer, ts)
}

/// Integer-path single tile without the final shift, for divisibility
/// checks: returns `divisor ·` the true block.
pub fn f3dc_tile_preshift(g: &Tensor3<i64>, d: &Tensor3<i64>, ts: &TransformSet, quant: &QuantSpec) -> Result<Tensor3<i64>> {
    CompiledTransform::<i64>::new(ts, quant.kernel_scale)?.tile(g, d)
}

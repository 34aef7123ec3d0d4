//! Single-layer execution on tensors read from disk.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use f3dc_core::{deconv3d_zim, DType, F3dcEngine, LayerSpec, RawTensor, TransformSet};

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub input: PathBuf,
    pub weights: PathBuf,
    pub output: PathBuf,
    /// Defaults to the kernel extent stored in the weights file.
    pub k: Option<usize>,
    pub s: usize,
    pub p: usize,
    /// Route through the zero-insertion reference instead of the fast path.
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dtype: DType,
    pub c_in: usize,
    pub c_out: usize,
    pub i: usize,
    pub o: usize,
    pub path: &'static str,
}

impl RunSummary {
    pub fn render(&self) -> String {
        format!(
            "{} {}->{} channels, {}^3 -> {}^3 via {}\n",
            self.dtype.name(),
            self.c_in,
            self.c_out,
            self.i,
            self.o,
            self.path
        )
    }
}

pub fn cmd_run(args: &RunArgs, ts: &TransformSet, threads: usize) -> Result<RunSummary> {
    let input = RawTensor::read_file(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let weights =
        RawTensor::read_file(&args.weights).with_context(|| format!("reading {}", args.weights.display()))?;
    if input.dtype() != weights.dtype() {
        bail!(
            "input is {} but weights are {}",
            input.dtype().name(),
            weights.dtype().name()
        );
    }
    if input.dims.len() != 4 || weights.dims.len() != 5 {
        bail!(
            "expected input [c_in, d, h, w] and weights [c_out, c_in, k, k, k], got {:?} and {:?}",
            input.dims,
            weights.dims
        );
    }
    let [c_in, d0, d1, d2] = [input.dims[0], input.dims[1], input.dims[2], input.dims[3]];
    if d0 != d1 || d1 != d2 {
        bail!("input volume must be cubic, got {d0}x{d1}x{d2}");
    }
    let (c_out, w_cin, w_k) = (weights.dims[0], weights.dims[1], weights.dims[2]);
    if w_cin != c_in {
        bail!("weights expect {w_cin} input channels, input has {c_in}");
    }
    let k = args.k.unwrap_or(w_k);
    if k != w_k {
        bail!("--k {k} does not match the weights' kernel extent {w_k}");
    }
    let layer = LayerSpec::new(c_in, c_out, d0, k, args.s, args.p)?;
    let engine = F3dcEngine::new(threads)?;

    let (out, path) = match input.dtype() {
        DType::I64 => {
            let x = input.to_volume::<i64>()?;
            let w = weights.to_weights::<i64>()?;
            if args.oracle {
                (RawTensor::from(&deconv3d_zim(&x, &w, &layer.geom)?), "zero-insertion oracle")
            } else {
                let q = engine.quant_spec();
                q.check_activations(&x)
                    .and_then(|_| q.check_weights(&w))
                    .context("integer inputs must fit the fixed-point widths; use f64 tensors or --oracle")?;
                (RawTensor::from(&engine.deconv_quant(&x, &w, &layer, ts)?), "f3dc fixed-point")
            }
        }
        DType::F64 => {
            let x = input.to_volume::<f64>()?;
            let w = weights.to_weights::<f64>()?;
            if args.oracle {
                (RawTensor::from(&deconv3d_zim(&x, &w, &layer.geom)?), "zero-insertion oracle")
            } else {
                (RawTensor::from(&engine.deconv(&x, &w, &layer, ts)?), "f3dc")
            }
        }
    };
    out.write_file(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(RunSummary {
        dtype: input.dtype(),
        c_in,
        c_out,
        i: d0,
        o: layer.geom.o(),
        path,
    })
}

//! Wall-clock comparison of the fast path against zero insertion.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use f3dc_core::perf::to_f64;
use f3dc_core::{count_multiplies, deconv3d_zim, F3dcEngine, TransformSet};
use serde::{Deserialize, Serialize};

use crate::config::BenchConfig;
use crate::verify::layer_data;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub layer: String,
    pub c_in: usize,
    pub c_out: usize,
    pub i: usize,
    pub o: usize,
    pub f3dc_ms: f64,
    pub zim_ms: f64,
    pub speedup: f64,
    pub f3dc_total_mults: u64,
    /// Over the uncropped tile grid.
    pub f3dc_mults_per_output: f64,
    pub f3dc_mults_per_valid_output: f64,
    pub zim_mults_per_output: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median of `reps` timed runs after one untimed warm-up.
fn time_ms<R>(reps: usize, mut f: impl FnMut() -> Result<R>) -> Result<(f64, R)> {
    let warm = f()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(f()?);
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(samples), warm))
}

pub fn cmd_bench(cfg: &BenchConfig, ts: &TransformSet, threads: usize) -> Result<BenchReport> {
    if cfg.repetitions == 0 {
        bail!("repetitions must be at least 1");
    }
    let engine = F3dcEngine::new(threads)?;
    let mut rows = Vec::new();
    for (index, entry) in cfg.layers.iter().enumerate() {
        let layer = entry.spec()?;
        let (x, w) = layer_data(cfg, index, entry);
        let (x, w) = (x.to_f64(), w.to_f64());
        let (f3dc_ms, fast) = time_ms(cfg.repetitions, || {
            // weight transforms are part of the measured work
            engine.clear_cache();
            Ok(engine.deconv(&x, &w, &layer, ts)?)
        })
        .with_context(|| format!("layer {:?}", entry.name))?;
        let (zim_ms, slow) = time_ms(cfg.repetitions, || Ok(deconv3d_zim(&x, &w, &layer.geom)?))?;
        if fast != slow {
            bail!("layer {:?}: fast path disagrees with the zero-insertion oracle", entry.name);
        }
        let count = count_multiplies(&layer, ts)?;
        rows.push(BenchRow {
            layer: entry.name.clone(),
            c_in: entry.c_in,
            c_out: entry.c_out,
            i: entry.i,
            o: layer.geom.o(),
            f3dc_ms,
            zim_ms,
            speedup: zim_ms / f3dc_ms,
            f3dc_total_mults: count.total,
            f3dc_mults_per_output: to_f64(count.per_output),
            f3dc_mults_per_valid_output: to_f64(count.per_valid_output),
            zim_mults_per_output: count.zim_per_output,
        });
    }
    Ok(BenchReport {
        repetitions: cfg.repetitions,
        rows,
    })
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "median of {} runs (after warm-up)", self.repetitions);
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>4} {:>4} {:>11} {:>11} {:>8} {:>10} {:>10}",
            "layer", "channels", "i", "o", "f3dc ms", "zim ms", "speedup", "mul/out", "zim mul"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>9} {:>4} {:>4} {:>11.3} {:>11.3} {:>7.2}x {:>10.3} {:>10}",
                r.layer,
                format!("{}->{}", r.c_in, r.c_out),
                r.i,
                r.o,
                r.f3dc_ms,
                r.zim_ms,
                r.speedup,
                r.f3dc_mults_per_output,
                r.zim_mults_per_output
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

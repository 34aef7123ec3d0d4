//! Oracle-equivalence checking over a layer suite.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use f3dc_core::{deconv3d_iom, deconv3d_zim, ChannelVolume, F3dcEngine, TransformSet, WeightBank};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, LayerEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub layer: String,
    pub c_in: usize,
    pub c_out: usize,
    pub i: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub o: usize,
    pub seed: u64,
    /// Largest |iom − zim| over all outputs.
    pub iom_max_dev: i64,
    pub f3dc_max_dev: f64,
    pub quant_max_dev: i64,
    pub quant_checked: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "oracle verification, seed {}", self.seed);
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>4} {:>4} {:>10} {:>10} {:>10}  result",
            "layer", "channels", "i", "o", "iom dev", "f3dc dev", "quant dev"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>4} {:>4} {:>10} {:>10} {:>10}  {}",
                r.layer,
                format!("{}->{}", r.c_in, r.c_out),
                r.i,
                r.o,
                r.iom_max_dev,
                r.f3dc_max_dev,
                r.quant_max_dev,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        if failed == 0 {
            let _ = writeln!(out, "all {} layers passed", self.rows.len());
        } else {
            let _ = writeln!(out, "{failed} of {} layers FAILED", self.rows.len());
        }
        out
    }
}

/// Seeded random activations and weights for one layer.
pub fn layer_data(cfg: &BenchConfig, index: usize, layer: &LayerEntry) -> (ChannelVolume<i64>, WeightBank<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.layer_seed(index));
    let [alo, ahi] = cfg.activation_range;
    let [wlo, whi] = cfg.weight_range;
    let n = layer.i * layer.i * layer.i;
    let x: Vec<i64> = (0..layer.c_in * n).map(|_| rng.gen_range(alo..=ahi)).collect();
    let kk = layer.k.pow(3);
    let w: Vec<i64> = (0..layer.c_out * layer.c_in * kk).map(|_| rng.gen_range(wlo..=whi)).collect();
    (
        ChannelVolume::from_flat(layer.c_in, [layer.i; 3], x).expect("sizes computed from layer"),
        WeightBank::from_flat(layer.c_out, layer.c_in, layer.k, w).expect("sizes computed from layer"),
    )
}

fn max_dev(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

pub fn cmd_verify(cfg: &BenchConfig, ts: &TransformSet, threads: usize) -> Result<VerifyReport> {
    let engine = F3dcEngine::new(threads)?;
    let mut rows = Vec::with_capacity(cfg.layers.len());
    for (index, entry) in cfg.layers.iter().enumerate() {
        let layer = entry.spec()?;
        let (x, w) = layer_data(cfg, index, entry);
        let ctx = || format!("layer {:?}", entry.name);

        let zim = deconv3d_zim(&x, &w, &layer.geom).with_context(ctx)?.to_flat();
        let iom = deconv3d_iom(&x, &w, &layer.geom).with_context(ctx)?.to_flat();
        let fast = engine.deconv(&x.to_f64(), &w.to_f64(), &layer, ts).with_context(ctx)?.to_flat();
        let (quant, qstats) = engine.deconv_quant_with_stats(&x, &w, &layer, ts).with_context(ctx)?;
        let quant = quant.to_flat();

        let iom_max_dev = max_dev(&iom, &zim);
        let quant_max_dev = max_dev(&quant, &zim);
        let f3dc_max_dev = fast
            .iter()
            .zip(&zim)
            .map(|(a, &b)| (a - b as f64).abs())
            .fold(0.0, f64::max);
        rows.push(VerifyRow {
            layer: entry.name.clone(),
            c_in: entry.c_in,
            c_out: entry.c_out,
            i: entry.i,
            k: entry.k,
            s: entry.s,
            p: entry.p,
            o: layer.geom.o(),
            seed: cfg.layer_seed(index),
            iom_max_dev,
            f3dc_max_dev,
            quant_max_dev,
            quant_checked: qstats.checked_values,
            pass: iom_max_dev == 0 && quant_max_dev == 0 && f3dc_max_dev == 0.0,
        });
    }
    Ok(VerifyReport { seed: cfg.seed, rows })
}

//! Complexity and throughput reports.

use std::fmt::Write as _;

use f3dc_core::perf::{round_to, to_f64};
use f3dc_core::{table1, throughput_model, HardwareConfig, OpConvention, ThroughputReport};
use serde::{Deserialize, Serialize};

/// Formats like the published tables: up to three decimals when exact at
/// that precision, otherwise two.
pub fn table_style(x: f64) -> String {
    let places = if (x * 1000.0).fract() == 0.0 { 3 } else { 2 };
    let s = format!("{:.*}", places as usize, round_to(x, places));
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCsvRow {
    pub k: usize,
    pub s: usize,
    pub r: usize,
    pub zim: f64,
    pub winograd_based: f64,
    pub f3dc: f64,
    pub f3dc_exact: String,
    pub speedup_vs_zim: f64,
    pub speedup_exact: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityCsvRow>,
}

pub fn cmd_complexity() -> ComplexityReport {
    let rows = table1()
        .into_iter()
        .map(|row| ComplexityCsvRow {
            k: row.k,
            s: row.s,
            r: row.r,
            zim: to_f64(row.zim),
            winograd_based: to_f64(row.winograd_based),
            f3dc: to_f64(row.f3dc),
            f3dc_exact: row.f3dc.to_string(),
            speedup_vs_zim: to_f64(row.speedup_vs_zim()),
            speedup_exact: row.speedup_vs_zim().to_string(),
        })
        .collect();
    ComplexityReport { rows }
}

impl ComplexityReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "multiplications per output (s = 2, order 3)");
        let mut line = |label: &str, f: &dyn Fn(&ComplexityCsvRow) -> String| {
            let _ = write!(out, "{label:<34}");
            for r in &self.rows {
                let _ = write!(out, " {:>9}", f(r));
            }
            let _ = writeln!(out);
        };
        line("", &|r| format!("k={}", r.k));
        line("zero-inserting", &|r| table_style(r.zim));
        line("winograd-based (inferred (k/s)^3)", &|r| table_style(r.winograd_based));
        line("f3dc", &|r| table_style(r.f3dc));
        line("f3dc exact", &|r| r.f3dc_exact.clone());
        line("reduction vs zero-inserting", &|r| format!("{:.2}x", r.speedup_vs_zim));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRow {
    pub label: String,
    pub fpu_count: usize,
    pub multipliers_per_fpu: usize,
    pub dsp_total: usize,
    pub clock_hz: f64,
    pub k: usize,
    pub s: usize,
    pub r: usize,
    pub mu: f64,
    pub peak_mult_rate: f64,
    pub equiv_valid_gops: f64,
    pub equiv_zim_gops: f64,
    pub target_gops: f64,
    pub utilization_valid: f64,
    pub utilization_zim: f64,
    pub density_gops_per_dsp: f64,
}

impl PerfRow {
    fn new(label: &str, rep: &ThroughputReport, target: f64) -> Self {
        let hw = rep.hardware;
        PerfRow {
            label: label.to_string(),
            fpu_count: hw.fpu_count,
            multipliers_per_fpu: hw.multipliers_per_fpu,
            dsp_total: hw.dsp_total,
            clock_hz: hw.clock_hz,
            k: rep.k,
            s: rep.s,
            r: rep.r,
            mu: to_f64(rep.mu),
            peak_mult_rate: rep.peak_mult_rate,
            equiv_valid_gops: rep.equiv_valid_gops,
            equiv_zim_gops: rep.equiv_zim_gops,
            target_gops: target,
            utilization_valid: rep.utilization_for(target, OpConvention::ValidMacs),
            utilization_zim: rep.utilization_for(target, OpConvention::ZeroInsertedMacs),
            density_gops_per_dsp: rep.density_at(target),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfReport {
    pub rows: Vec<PerfRow>,
}

/// Throughput model for the default array and, if any override is given,
/// for the overridden one.
pub fn cmd_perf(dsp: Option<usize>, clock_hz: Option<f64>, target_gops: f64) -> anyhow::Result<PerfReport> {
    let (k, s, r) = (4, 2, 3);
    let base = HardwareConfig::default();
    let mut rows = vec![PerfRow::new("default", &throughput_model(&base, k, s, r), target_gops)];
    if dsp.is_some() || clock_hz.is_some() {
        let mut hw = base;
        if let Some(d) = dsp {
            hw = hw.with_dsp(d);
        }
        if let Some(c) = clock_hz {
            hw = hw.with_clock(c);
        }
        hw.validate().map_err(anyhow::Error::msg)?;
        rows.push(PerfRow::new("override", &throughput_model(&hw, k, s, r), target_gops));
    }
    Ok(PerfReport { rows })
}

impl PerfReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "[{}] {} FPUs x {} multipliers, {} DSPs, {:.1} MHz", r.label, r.fpu_count, r.multipliers_per_fpu, r.dsp_total, r.clock_hz / 1e6);
            let _ = writeln!(out, "  k={} s={} r={}  mu = {:.4} multiplies/output", r.k, r.s, r.r, r.mu);
            let _ = writeln!(out, "  peak multiply rate      {:.4e} /s", r.peak_mult_rate);
            let _ = writeln!(out, "  equivalent GOPS (valid) {:.1}", r.equiv_valid_gops);
            let _ = writeln!(out, "  equivalent GOPS (zim)   {:.1}", r.equiv_zim_gops);
            let _ = writeln!(out, "  at {} GOPS: utilization {:.4} (valid), {:.4} (zim); density {:.3} GOPS/DSP", r.target_gops, r.utilization_valid, r.utilization_zim, r.density_gops_per_dsp);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_style_matches_published_precision() {
        let got: Vec<String> = [27.0, 3.375, 8.0, 15.625, 343.0 / 216.0, 512.0 / 216.0, 2197.0 / 216.0]
            .iter()
            .map(|&x| table_style(x))
            .collect();
        assert_eq!(got, ["27", "3.375", "8", "15.625", "1.59", "2.37", "10.17"]);
    }

    #[test]
    fn complexity_render_has_the_columns() {
        let text = cmd_complexity().render();
        assert!(text.contains("729"));
        assert!(text.contains("91.125"));
        assert!(text.contains("10.17"));
        assert!(text.contains("27.00x"));
        assert!(text.contains("inferred"));
    }

    #[test]
    fn perf_override_adds_a_row() {
        assert_eq!(cmd_perf(None, None, 1700.0).unwrap().rows.len(), 1);
        let rep = cmd_perf(Some(1536), Some(200e6), 1700.0).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[1].multipliers_per_fpu, 384);
        assert!(cmd_perf(None, Some(-1.0), 1700.0).is_err());
    }
}

//! Analytical complexity and throughput model.
//!
//! Complexity figures are multiplies per output element per channel pair,
//! kept as exact rationals and only rendered to decimals for display.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::transform::tile_sizes;

pub type Rational = Ratio<i64>;

/// `μ = [k + (r−1)s]³ / (r·s)³`.
pub fn mu(k: usize, s: usize, r: usize) -> Rational {
    let (_, e_r, o_r) = tile_sizes(k, s, r);
    Ratio::new((e_r as i64).pow(3), (o_r as i64).pow(3))
}

/// Multiply reduction of the fast algorithm over the zero-insertion method.
pub fn speedup_vs_zim(k: usize, s: usize, r: usize) -> Rational {
    Ratio::from_integer((k as i64).pow(3)) / mu(k, s, r)
}

/// One column of the complexity comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityRow {
    pub k: usize,
    pub s: usize,
    pub r: usize,
    /// Zero-insertion method, `k³`.
    pub zim: Rational,
    /// Winograd on the zero-inserted map; `(k/s)³`, inferred from the
    /// published values rather than a stated formula.
    pub winograd_based: Rational,
    pub f3dc: Rational,
}

impl ComplexityRow {
    pub fn new(k: usize, s: usize, r: usize) -> Self {
        let kk = k as i64;
        let ss = s as i64;
        ComplexityRow {
            k,
            s,
            r,
            zim: Ratio::from_integer(kk.pow(3)),
            winograd_based: Ratio::new(kk.pow(3), ss.pow(3)),
            f3dc: mu(k, s, r),
        }
    }

    pub fn speedup_vs_zim(&self) -> Rational {
        self.zim / self.f3dc
    }
}

/// Kernel sizes 3, 4, 5 and 9 at stride 2, order 3.
pub fn table1() -> Vec<ComplexityRow> {
    [3, 4, 5, 9].iter().map(|&k| ComplexityRow::new(k, 2, 3)).collect()
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Rounds to `places` decimals for presentation.
pub fn round_to(x: f64, places: u32) -> f64 {
    let f = 10f64.powi(places as i32);
    (x * f).round() / f
}

/// Fast processing array parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareConfig {
    pub fpu_count: usize,
    pub multipliers_per_fpu: usize,
    pub clock_hz: f64,
    pub dsp_total: usize,
}

impl Default for HardwareConfig {
    /// Four 8×8×8-multiplier units at 150 MHz on 2048 DSPs.
    fn default() -> Self {
        HardwareConfig {
            fpu_count: 4,
            multipliers_per_fpu: 512,
            clock_hz: 150e6,
            dsp_total: 2048,
        }
    }
}

impl HardwareConfig {
    pub fn multipliers(&self) -> usize {
        self.fpu_count * self.multipliers_per_fpu
    }

    /// Sets the DSP budget, spreading it evenly over the units.
    pub fn with_dsp(mut self, dsp: usize) -> Self {
        self.dsp_total = dsp;
        self.multipliers_per_fpu = dsp / self.fpu_count.max(1);
        self
    }

    pub fn with_clock(mut self, hz: f64) -> Self {
        self.clock_hz = hz;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fpu_count == 0 || self.multipliers_per_fpu == 0 || self.dsp_total == 0 {
            return Err(format!("hardware counts must be positive: {self:?}"));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(format!("clock {} Hz must be positive", self.clock_hz));
        }
        if self.multipliers() > self.dsp_total {
            return Err(format!(
                "{} multipliers do not fit in {} DSPs",
                self.multipliers(),
                self.dsp_total
            ));
        }
        Ok(())
    }
}

/// Which multiply-accumulates count toward reported GOPS (2 ops per MAC).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpConvention {
    /// Only MACs touching real input samples, `k³/s³` per output.
    ValidMacs,
    /// Every MAC of the zero-inserted convolution, `k³` per output.
    ZeroInsertedMacs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub hardware: HardwareConfig,
    pub k: usize,
    pub s: usize,
    pub r: usize,
    pub mu: Rational,
    /// Element-wise multiplies per second at full occupancy.
    pub peak_mult_rate: f64,
    pub equiv_valid_gops: f64,
    pub equiv_zim_gops: f64,
}

impl ThroughputReport {
    pub fn peak_gops(&self, convention: OpConvention) -> f64 {
        match convention {
            OpConvention::ValidMacs => self.equiv_valid_gops,
            OpConvention::ZeroInsertedMacs => self.equiv_zim_gops,
        }
    }

    /// Fraction of the modelled peak that `target_gops` represents.
    pub fn utilization_for(&self, target_gops: f64, convention: OpConvention) -> f64 {
        target_gops / self.peak_gops(convention)
    }

    /// GOPS per DSP at `target_gops`.
    pub fn density_at(&self, target_gops: f64) -> f64 {
        target_gops / self.hardware.dsp_total as f64
    }
}

pub fn throughput_model(hw: &HardwareConfig, k: usize, s: usize, r: usize) -> ThroughputReport {
    let mu = mu(k, s, r);
    let peak = hw.multipliers() as f64 * hw.clock_hz;
    let outputs_per_sec = peak / to_f64(mu);
    let valid_macs = to_f64(Ratio::new((k as i64).pow(3), (s as i64).pow(3)));
    let zim_macs = (k as f64).powi(3);
    ThroughputReport {
        hardware: *hw,
        k,
        s,
        r,
        mu,
        peak_mult_rate: peak,
        equiv_valid_gops: outputs_per_sec * valid_macs * 2.0 / 1e9,
        equiv_zim_gops: outputs_per_sec * zim_macs * 2.0 / 1e9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_values() {
        assert_eq!(mu(4, 2, 3), Ratio::new(512, 216));
        assert_eq!(mu(3, 2, 3), Ratio::new(343, 216));
        assert_eq!(mu(9, 2, 3), Ratio::new(2197, 216));
        for k in 1..10 {
            assert_eq!(mu(k, 1, 1), Ratio::from_integer((k as i64).pow(3)));
        }
    }

    #[test]
    fn speedups() {
        assert_eq!(speedup_vs_zim(4, 2, 3), Ratio::from_integer(27));
        assert!((to_f64(speedup_vs_zim(5, 2, 3)) - 125.0 / 3.375).abs() < 1e-12);
        for s in 1..5 {
            assert_eq!(speedup_vs_zim(s, s, 1), Ratio::from_integer((s as i64).pow(3)));
        }
    }

    #[test]
    fn table_ordering() {
        for row in table1() {
            assert!(row.f3dc <= row.winograd_based && row.winograd_based <= row.zim);
            assert_eq!(row.speedup_vs_zim(), speedup_vs_zim(row.k, row.s, row.r));
        }
    }

    #[test]
    fn default_throughput() {
        let rep = throughput_model(&HardwareConfig::default(), 4, 2, 3);
        assert_eq!(rep.peak_mult_rate, 3.072e11);
        assert!((rep.equiv_valid_gops - 2073.6).abs() < 1e-6);
        assert!((rep.equiv_zim_gops - 16588.8).abs() < 1e-6);
        assert!((rep.density_at(1700.0) - 0.830078125).abs() < 1e-12);
    }

    #[test]
    fn utilization_is_monotone_and_consistent() {
        let rep = throughput_model(&HardwareConfig::default(), 4, 2, 3);
        let mut last = 0.0;
        for t in [1.0, 100.0, 1700.0, 2073.6, 5000.0] {
            for conv in [OpConvention::ValidMacs, OpConvention::ZeroInsertedMacs] {
                let u = rep.utilization_for(t, conv);
                assert!((u * rep.peak_gops(conv) - t).abs() <= t * 1e-15);
            }
            let u = rep.utilization_for(t, OpConvention::ValidMacs);
            assert!(u > last);
            last = u;
        }
    }

    #[test]
    fn hardware_overrides_scale_peak_linearly() {
        let base = throughput_model(&HardwareConfig::default(), 4, 2, 3);
        let hw = HardwareConfig::default().with_dsp(1536).with_clock(200e6);
        hw.validate().unwrap();
        let scaled = throughput_model(&hw, 4, 2, 3);
        let expect = base.peak_mult_rate * (1536.0 / 2048.0) * (200.0 / 150.0);
        assert!((scaled.peak_mult_rate - expect).abs() < 1.0);
        assert!((scaled.equiv_valid_gops / base.equiv_valid_gops - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_hardware() {
        assert!(HardwareConfig::default().with_clock(0.0).validate().is_err());
        let hw = HardwareConfig {
            dsp_total: 100,
            ..HardwareConfig::default()
        };
        assert!(hw.validate().is_err());
    }
}

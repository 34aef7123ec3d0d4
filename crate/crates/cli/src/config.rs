//! Layer-suite configuration files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use f3dc_core::{plan_tiles, LayerSpec, QuantSpec, TransformSet};
use serde::{Deserialize, Serialize};

pub const DEFAULT_VERIFY: &str = include_str!("../configs/verify.toml");
pub const DEFAULT_BENCH: &str = include_str!("../configs/bench.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub i: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
}

impl LayerEntry {
    pub fn spec(&self) -> Result<LayerSpec> {
        LayerSpec::new(self.c_in, self.c_out, self.i, self.k, self.s, self.p)
            .with_context(|| format!("layer {:?}", self.name))
    }
}

fn default_repetitions() -> usize {
    1
}

fn default_activation_range() -> [i64; 2] {
    [-32768, 32767]
}

fn default_weight_range() -> [i64; 2] {
    [-128, 127]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_activation_range")]
    pub activation_range: [i64; 2],
    #[serde(default = "default_weight_range")]
    pub weight_range: [i64; 2],
    #[serde(rename = "layer", default)]
    pub layers: Vec<LayerEntry>,
}

impl BenchConfig {
    /// Parses and validates every layer against `ts`.
    pub fn parse(text: &str, ts: &TransformSet) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text).context("malformed config")?;
        cfg.validate(ts)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, ts: &TransformSet) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, ts).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self, ts: &TransformSet) -> Result<()> {
        if self.layers.is_empty() {
            bail!("config lists no layers");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        let q = QuantSpec::default();
        for (what, [lo, hi], bits) in [
            ("activation_range", self.activation_range, q.activation_bits),
            ("weight_range", self.weight_range, q.weight_bits),
        ] {
            let (min, max) = (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1);
            if lo > hi || lo < min || hi > max {
                bail!("{what} [{lo}, {hi}] must be ordered and within signed {bits}-bit [{min}, {max}]");
            }
        }
        for layer in &self.layers {
            let spec = layer.spec()?;
            plan_tiles(&spec, ts).with_context(|| format!("layer {:?} cannot use the transform set", layer.name))?;
        }
        Ok(())
    }

    /// Independent stream seed for layer `index`.
    pub fn layer_seed(&self, index: usize) -> u64 {
        self.seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use f3dc_core::builtin_t3_k4_s2;

    #[test]
    fn shipped_configs_are_valid() {
        let ts = builtin_t3_k4_s2();
        let v = BenchConfig::parse(DEFAULT_VERIFY, &ts).unwrap();
        assert!(v.layers.iter().all(|l| [2, 4, 8].contains(&l.i) && l.c_in <= 4 && l.c_out <= 4));
        assert!(v.layers.iter().all(|l| (l.k, l.s, l.p) == (4, 2, 1)));
        let b = BenchConfig::parse(DEFAULT_BENCH, &ts).unwrap();
        assert!(b.repetitions >= 1);
    }

    #[test]
    fn phase_mismatch_rejected_at_load() {
        let ts = builtin_t3_k4_s2();
        let text = DEFAULT_VERIFY.replacen("p = 1", "p = 0", 1);
        let err = BenchConfig::parse(&text, &ts).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("tiny"), "{msg}");
        assert!(msg.contains("phase"), "{msg}");
    }

    #[test]
    fn zero_repetitions_rejected() {
        let ts = builtin_t3_k4_s2();
        let text = DEFAULT_BENCH.replacen("repetitions = 3", "repetitions = 0", 1);
        assert!(BenchConfig::parse(&text, &ts).is_err());
    }

    #[test]
    fn ranges_and_keys_validated() {
        let ts = builtin_t3_k4_s2();
        let text = DEFAULT_VERIFY.replacen("weight_range = [-128, 127]", "weight_range = [-128, 128]", 1);
        assert!(BenchConfig::parse(&text, &ts).is_err());
        let text = format!("bogus = 1\n{DEFAULT_VERIFY}");
        assert!(BenchConfig::parse(&text, &ts).is_err());
        assert!(BenchConfig::parse("seed = 1\n", &ts).is_err());
    }

    #[test]
    fn layer_seeds_differ() {
        let ts = builtin_t3_k4_s2();
        let c = BenchConfig::parse(DEFAULT_VERIFY, &ts).unwrap();
        assert_ne!(c.layer_seed(0), c.layer_seed(1));
    }
}

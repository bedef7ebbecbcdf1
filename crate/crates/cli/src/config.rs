//! TOML experiment configuration. Every table rejects unknown keys; every
//! key has a default, so an empty file (or none) is a valid config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use vcbound::bounds::Cor2Argument;
use vcbound::sample::Distribution;
use vcbound::shatter::DEFAULT_BUDGET;

/// Distributions with an unknown key are rejected. Serde's own check misses
/// extra keys next to a bare `kind = "uniform"`.
fn strict_dist<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Distribution, D::Error> {
    use serde::de::Error;
    let table = toml::Table::deserialize(de)?;
    let allowed: &[&str] = match table.get("kind").and_then(|k| k.as_str()) {
        Some("uniform") => &["kind"],
        Some("discrete") => &["kind", "atoms", "probs"],
        Some("quantile") => &["kind", "probs", "values"],
        _ => &["kind", "atoms", "probs", "values"],
    };
    if let Some(k) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(D::Error::custom(format!("unknown field `{k}` in distribution")));
    }
    toml::Value::Table(table).try_into().map_err(D::Error::custom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub bounds: BoundsConfig,
    pub simulate: SimulateConfig,
    pub shatter: ShatterConfig,
    pub chain: ChainConfig,
    pub compare: CompareConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            format: Format::Csv,
            out: None,
            jobs: None,
            bounds: BoundsConfig::default(),
            simulate: SimulateConfig::default(),
            shatter: ShatterConfig::default(),
            chain: ChainConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub n: Vec<u64>,
    pub d: Vec<u64>,
    pub sigma: Vec<f64>,
    /// Half-width of the family's range `[-b, b]`.
    pub b: f64,
    pub cor2_argument: Cor2Argument,
    /// Estimate `u ↦ Γ_u` per `n` and evaluate the general form too.
    pub curve: Option<CurveConfig>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            n: vec![3],
            d: vec![1],
            sigma: vec![1.0],
            b: 1.0,
            cor2_argument: Cor2Argument::default(),
            curve: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    pub family: String,
    #[serde(deserialize_with = "strict_dist")]
    pub dist: Distribution,
    /// Levels in `(0, 1)`.
    pub grid: Vec<f64>,
    pub reps: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            family: "intervals".into(),
            dist: Distribution::Uniform,
            grid: (1..10).map(|k| k as f64 / 10.0).collect(),
            reps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub family: String,
    #[serde(deserialize_with = "strict_dist")]
    pub dist: Distribution,
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
    /// Dimension fed to the bounds; defaults to the family's declared one.
    pub d: Option<u64>,
    pub reps: usize,
    pub bounds: Vec<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            family: "intervals-capped".into(),
            dist: Distribution::Uniform,
            n: vec![50, 100, 200, 500],
            sigma: vec![0.05, 0.1, 0.2, 0.4, 0.8],
            d: None,
            reps: 2000,
            bounds: ["thm1", "thm2", "prop4", "cor3"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShatterConfig {
    pub families: Vec<String>,
    #[serde(deserialize_with = "strict_dist")]
    pub dist: Distribution,
    pub n: Vec<usize>,
    /// Random samples per `(family, n)`.
    pub samples: usize,
    /// Shattering tests allowed per dimension estimate.
    pub budget: usize,
    /// Random members per sample for families without analytic level sets.
    pub probes: usize,
}

impl Default for ShatterConfig {
    fn default() -> Self {
        Self {
            families: [
                "halflines",
                "intervals",
                "monotone-nondecr",
                "monotone-nonincr",
                "monotone",
                "translated-monotone",
            ]
            .map(String::from)
            .to_vec(),
            dist: Distribution::Uniform,
            n: (3..=8).collect(),
            samples: 20,
            budget: DEFAULT_BUDGET,
            probes: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub family: String,
    #[serde(deserialize_with = "strict_dist")]
    pub dist: Distribution,
    pub n: usize,
    pub d: Option<u64>,
    /// Defaults to the realized largest trace frequency.
    pub eta0: Option<f64>,
    /// Defaults to signs drawn from the seed.
    pub signs: Option<Vec<f64>>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            family: "intervals".into(),
            dist: Distribution::Uniform,
            n: 8,
            d: None,
            eta0: None,
            signs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub family: String,
    #[serde(deserialize_with = "strict_dist")]
    pub dist: Distribution,
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
    pub d: Option<u64>,
    pub reps: usize,
    pub cor2_argument: Cor2Argument,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            family: "intervals-capped".into(),
            dist: Distribution::Uniform,
            n: vec![100],
            sigma: vec![0.1, 0.3, 1.0],
            d: None,
            reps: 500,
            cor2_argument: Cor2Argument::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let cfg: Config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Config::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        let b = &self.bounds;
        if b.n.is_empty() || b.d.is_empty() || b.sigma.is_empty() {
            bail!("bounds: n, d and sigma grids must be nonempty");
        }
        if let Some(c) = &b.curve {
            if c.grid.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
                bail!("bounds.curve: grid levels must lie in (0, 1)");
            }
            if c.reps < 2 {
                bail!("bounds.curve: reps must be at least 2");
            }
            c.dist.validate()?;
        }
        let s = &self.simulate;
        if s.n.is_empty() || s.sigma.is_empty() {
            bail!("simulate: n and sigma grids must be nonempty");
        }
        if s.reps < 2 {
            bail!("simulate: reps must be at least 2");
        }
        s.dist.validate()?;
        let sh = &self.shatter;
        if sh.families.is_empty() || sh.n.is_empty() {
            bail!("shatter: families and n must be nonempty");
        }
        sh.dist.validate()?;
        if self.chain.n == 0 {
            bail!("chain: n must be at least 1");
        }
        self.chain.dist.validate()?;
        let c = &self.compare;
        if c.n.is_empty() || c.sigma.is_empty() {
            bail!("compare: n and sigma grids must be nonempty");
        }
        if c.reps < 2 {
            bail!("compare: reps must be at least 2");
        }
        c.dist.validate()?;
        Ok(())
    }
}

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::block::BlockStructure;
use crate::error::{Error, Result};
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    RecoveryGrid,
    BlockDetection,
    TheoremVerify,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::RecoveryGrid => "recovery-grid",
            Scenario::BlockDetection => "block-detection",
            Scenario::TheoremVerify => "theorem-verify",
        }
    }
}

/// Either one length for every block or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockLengths {
    Uniform(usize),
    Explicit(Vec<usize>),
}

impl BlockLengths {
    pub fn structure(&self, blocks: usize) -> Result<BlockStructure> {
        match self {
            BlockLengths::Uniform(n) => BlockStructure::uniform(blocks, *n),
            BlockLengths::Explicit(v) if v.len() == blocks => BlockStructure::new(v.clone()),
            BlockLengths::Explicit(v) => Err(Error::Config(format!("{} block lengths for N = {blocks}", v.len()))),
        }
    }
}

/// Signal-to-noise ratio in dB; `+∞` means noiseless and is written `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub const NOISELESS: Snr = Snr(f64::INFINITY);

    pub fn is_noiseless(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub(crate) fn key(self) -> u64 {
        self.0.to_bits()
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_noiseless() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Snr(v)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(Snr::NOISELESS),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad snr value {t:?}"))),
        }
    }
}

/// Instance ranges for `theorem-verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoremVerifyConfig {
    pub instances: usize,
    pub max_antennas: usize,
    pub max_blocks: usize,
    pub max_per_antenna: usize,
    pub max_block_len: usize,
    pub max_s: usize,
    pub max_sigma: usize,
    /// Largest number of hierarchical supports one instance may enumerate.
    pub enumeration_budget: u64,
}

impl Default for TheoremVerifyConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            max_antennas: 10,
            max_blocks: 10,
            max_per_antenna: 12,
            max_block_len: 6,
            max_s: 3,
            max_sigma: 2,
            enumeration_budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Antenna counts `M`; every listed value is a separate grid axis entry.
    #[serde(rename = "M")]
    pub antennas: Vec<usize>,
    #[serde(rename = "N")]
    pub blocks: usize,
    #[serde(rename = "m")]
    pub per_antenna: usize,
    pub block_lengths: BlockLengths,
    pub s_values: Vec<usize>,
    pub sigma_values: Vec<usize>,
    pub snr_db: Vec<Snr>,
    pub trials: usize,
    pub master_seed: u64,
    pub solver: SolverConfig,
    pub output_path: Option<PathBuf>,
    /// Block detection: length of the designated short blocks in mixed mode.
    pub short_block_length: usize,
    /// Block detection: fraction of blocks (the leading ones) that are short.
    pub short_block_fraction: f64,
    /// Fill `wall_millis`; off by default so CSV output is reproducible.
    pub record_timing: bool,
    pub theorem: TheoremVerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk(Scenario::RecoveryGrid)
    }
}

impl ExperimentConfig {
    /// Small dimensions that run in CI.
    pub fn desk(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            antennas: vec![12],
            blocks: 16,
            per_antenna: 16,
            block_lengths: BlockLengths::Uniform(32),
            s_values: (1..=8).collect(),
            sigma_values: (1..=8).collect(),
            snr_db: vec![Snr(10.0)],
            trials: 20,
            master_seed: 2019,
            solver: SolverConfig::default(),
            output_path: None,
            short_block_length: 10,
            short_block_fraction: 0.5,
            record_timing: false,
            theorem: TheoremVerifyConfig::default(),
        };
        match scenario {
            Scenario::RecoveryGrid | Scenario::TheoremVerify => base,
            Scenario::BlockDetection => Self {
                antennas: vec![10, 20],
                blocks: 20,
                per_antenna: 50,
                block_lengths: BlockLengths::Uniform(200),
                s_values: vec![6],
                sigma_values: vec![5],
                snr_db: [-10.0, 0.0, 10.0].into_iter().map(Snr).collect(),
                trials: 10,
                ..base
            },
        }
    }

    /// The dimensions of the published experiments.
    pub fn paper(scenario: Scenario) -> Self {
        let desk = Self::desk(scenario);
        match scenario {
            Scenario::RecoveryGrid => Self {
                antennas: vec![40],
                blocks: 50,
                per_antenna: 50,
                block_lengths: BlockLengths::Uniform(100),
                s_values: (1..=25).collect(),
                sigma_values: (1..=20).collect(),
                snr_db: vec![Snr(10.0)],
                trials: 50,
                ..desk
            },
            Scenario::BlockDetection => Self {
                antennas: vec![10, 20, 30, 40],
                snr_db: [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0].into_iter().map(Snr).collect(),
                trials: 50,
                ..desk
            },
            Scenario::TheoremVerify => desk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas.is_empty() || self.antennas.contains(&0) {
            return Err(Error::Config("M values must be positive".into()));
        }
        if self.blocks == 0 || self.per_antenna == 0 {
            return Err(Error::Config("N and m must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.s_values.is_empty() || self.sigma_values.is_empty() || self.snr_db.is_empty() {
            return Err(Error::Config("s, sigma and snr lists must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.short_block_fraction) {
            return Err(Error::Config("short_block_fraction must lie in [0, 1]".into()));
        }
        if self.snr_db.iter().any(|s| s.0.is_nan() || s.0 == f64::NEG_INFINITY) {
            return Err(Error::Config("snr values must be finite or +inf".into()));
        }
        self.block_lengths.structure(self.blocks)?;
        self.solver.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

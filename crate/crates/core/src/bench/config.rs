use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheme::{SchemeConfig, SchemeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Hash,
    Bst,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::Hash => "hash",
            Structure::Bst => "bst",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "hash" => Ok(Structure::Hash),
            "bst" => Ok(Structure::Bst),
            _ => Err(ConfigError::Unknown { what: "structure", value: s.into() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Uniform,
    Zipf,
}

impl Dist {
    pub fn name(self) -> &'static str {
        match self {
            Dist::Uniform => "uniform",
            Dist::Zipf => "zipf",
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dist {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "uniform" => Ok(Dist::Uniform),
            "zipf" => Ok(Dist::Zipf),
            _ => Err(ConfigError::Unknown { what: "distribution", value: s.into() }),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
    #[error("size must be at least 1")]
    EmptyMap,
    #[error("key range [1, {range}] exceeds the largest supported key")]
    KeyRangeTooLarge { range: u64 },
    #[error("rtx size {size} must be in [1, {range}) for key range [1, {range}]")]
    RtxSize { size: u64, range: u64 },
    #[error("no worker threads configured")]
    NoWorkers,
    #[error("zipf theta must be positive and finite, got {0}")]
    Theta(f64),
    #[error("{what} must be {bound}, got {value}")]
    Duration { what: &'static str, bound: &'static str, value: f64 },
    #[error("runs must be at least 1")]
    NoRuns,
}

/// One benchmark setup. Keys are drawn from [1, 2n].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub structure: Structure,
    pub scheme: SchemeKind,
    pub n: usize,
    pub update_threads: usize,
    pub small_rtx_threads: usize,
    pub large_rtx_threads: usize,
    /// Workers running 50% updates, 49% lookups and 1% rtxs of `rtx_size`.
    pub mixed_threads: usize,
    /// Size of large (and mixed-mode) rtxs.
    pub rtx_size: u64,
    pub small_rtx_size: u64,
    pub dist: Dist,
    pub zipf_theta: f64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub runs: usize,
    pub seed: u64,
    /// Run exactly this many operations per worker instead of a timed
    /// phase (no warmup, no collection in between).
    pub ops_per_worker: Option<u64>,
    /// Workers are stopped and the heap collected at this interval.
    pub slice_ms: u64,
    /// Keep the shadow log for the snapshot checker (`verify` builds).
    pub shadow_log: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            structure: Structure::Hash,
            scheme: SchemeKind::SlRt,
            n: 10_000,
            update_threads: 4,
            small_rtx_threads: 2,
            large_rtx_threads: 2,
            mixed_threads: 0,
            rtx_size: 256,
            small_rtx_size: 16,
            dist: Dist::Uniform,
            zipf_theta: 0.99,
            duration_s: 2.0,
            warmup_s: 0.5,
            runs: 1,
            seed: 1,
            ops_per_worker: None,
            slice_ms: 100,
            shadow_log: false,
        }
    }
}

impl WorkloadConfig {
    pub fn key_range(&self) -> u64 {
        2 * self.n as u64
    }

    pub fn workers(&self) -> usize {
        self.update_threads + self.small_rtx_threads + self.large_rtx_threads + self.mixed_threads
    }

    /// Workers plus the driver's own participant.
    pub fn participants(&self) -> usize {
        self.workers() + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = self.key_range();
        if self.n == 0 {
            return Err(ConfigError::EmptyMap);
        }
        if self.structure == Structure::Bst && range > crate::structures::bst::MAX_KEY {
            return Err(ConfigError::KeyRangeTooLarge { range });
        }
        for size in [self.rtx_size, self.small_rtx_size] {
            if size == 0 || size >= range {
                return Err(ConfigError::RtxSize { size, range });
            }
        }
        if self.workers() == 0 {
            return Err(ConfigError::NoWorkers);
        }
        if !(self.zipf_theta.is_finite() && self.zipf_theta > 0.0) {
            return Err(ConfigError::Theta(self.zipf_theta));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::Duration { what: "duration", bound: "positive", value: self.duration_s });
        }
        if !(self.warmup_s.is_finite() && self.warmup_s >= 0.0) {
            return Err(ConfigError::Duration { what: "warmup", bound: "non-negative", value: self.warmup_s });
        }
        if self.runs == 0 {
            return Err(ConfigError::NoRuns);
        }
        Ok(())
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut c = SchemeConfig::new(self.scheme, self.participants());
        c.shadow_log = self.shadow_log;
        c
    }
}

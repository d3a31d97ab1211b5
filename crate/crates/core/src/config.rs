//! TOML run configuration: `[scenario]`, `[numerics]`, `[outputs]`, `[sweep]`.

use crate::error::{Error, Result};
use crate::pipeline::Numerics;
use crate::profiles::Scenario;
use serde::{Deserialize, Serialize};
use std::hash::{DefaultHasher, Hasher};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub trajectory: bool,
    /// Per-level first-order coefficient histories.
    pub coefficients: bool,
    /// Times at which the first-order in-state is dumped.
    pub snapshots: Vec<f64>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            trajectory: true,
            coefficients: false,
            snapshots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// Couplings for `oracle-compare`.
    pub lambda: Vec<f64>,
    /// Rescaled couplings for `fig1`.
    pub lambda_tilde: Vec<f64>,
    /// Target reflection coefficients for `fig1`.
    pub rho: Vec<f64>,
    /// Realize each `rho` with a tanh frequency profile and run the pipeline.
    pub realize: bool,
    /// Final level compared by `oracle-compare`.
    pub m: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            lambda: vec![0.05, 0.025],
            lambda_tilde: (0..=10).map(|i| i as f64 / 10.0).collect(),
            rho: (0..=9).map(|i| i as f64 / 10.0).collect(),
            realize: false,
            m: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, u64)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_toml(&text)?, config_hash(&text)))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.numerics.validate()?;
        let s = &self.sweep;
        let in_unit = |v: &[f64], hi: f64| v.iter().all(|x| (0.0..=hi).contains(x));
        if !in_unit(&s.lambda_tilde, 1.0) {
            return Err(Error::InvalidParameter("sweep.lambda_tilde must lie in [0, 1]".into()));
        }
        if !in_unit(&s.rho, 0.9) {
            return Err(Error::InvalidParameter("sweep.rho must lie in [0, 0.9]".into()));
        }
        if s.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("sweep.lambda entries must be >= 0".into()));
        }
        if self.outputs.snapshots.iter().any(|t| !(self.scenario.start()..=self.scenario.end()).contains(t)) {
            return Err(Error::InvalidParameter("outputs.snapshots must lie inside tau_span".into()));
        }
        Ok(())
    }
}

/// Stable hash of the raw config text, written into CSV metadata.
pub fn config_hash(text: &str) -> u64 {
    let mut h = DefaultHasher::new();
    h.write(text.as_bytes());
    h.finish()
}

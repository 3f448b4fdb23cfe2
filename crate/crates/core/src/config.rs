//! Scenario configuration: the schema shared by CLI flags and config files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::FreqSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tol::{ToleranceOverride, ToleranceProfile};

pub const TOL_OVERRIDE_ENV: &str = "GE_TOL_OVERRIDE";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverride>,
}

fn default_samples() -> u64 {
    500
}

fn default_seed() -> u64 {
    1
}

impl ScenarioConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            params: BTreeMap::new(),
            samples: default_samples(),
            seed: default_seed(),
            tolerances: None,
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("sample_count must be >= 1".into()));
        }
        if let Some(ov) = &self.tolerances {
            ov.apply(ToleranceProfile::<f64>::default()).validate()?;
        }
        Ok(())
    }

    /// Effective tolerance profile: defaults, then the config override, then
    /// the `GE_TOL_OVERRIDE` environment variable (JSON, partial).
    pub fn tolerance_profile<T: Scalar>(&self) -> Result<ToleranceProfile<T>> {
        let mut profile = ToleranceProfile::<T>::default();
        if let Some(ov) = &self.tolerances {
            profile = ov.apply(profile);
        }
        if let Ok(raw) = std::env::var(TOL_OVERRIDE_ENV) {
            if !raw.trim().is_empty() {
                let ov: ToleranceOverride = serde_json::from_str(&raw).map_err(|e| {
                    Error::Config(format!("invalid {TOL_OVERRIDE_ENV} value: {e}"))
                })?;
                profile = ov.apply(profile);
            }
        }
        profile.validate()?;
        Ok(profile)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    pub fn param_i64(&self, key: &str, default: i64) -> Result<i64> {
        match self.param(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("parameter `{key}` must be an integer"))),
        }
    }

    pub fn param_freq(&self, key: &str, default: FreqSpec) -> Result<FreqSpec> {
        match self.param(key) {
            None => Ok(default),
            Some(raw) => FreqSpec::parse(raw),
        }
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

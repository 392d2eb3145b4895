//! Run configuration shared by all commands.
//!
//! Precedence, lowest first: built-in defaults, the selected profile, a TOML
//! config file (or the `config` block of a run manifest), then command-line
//! overrides applied by the caller.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sampler::McmcConfig;
use crate::simulate::{SimulationSpec, SCENARIO_NAMES};
use crate::summary::DEFAULT_STABILITY_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Short chains for interactive use and CI.
    #[default]
    Desk,
    /// Full-length chains.
    Paper,
}

impl Profile {
    pub fn mcmc(self) -> McmcConfig {
        match self {
            Profile::Desk => McmcConfig::desk(),
            Profile::Paper => McmcConfig::paper(),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile `{other}` (desk|paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    /// IBS horizon; the 95th percentile of test times when unset.
    pub t_star: Option<f64>,
    pub stability_threshold: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            t_star: None,
            stability_threshold: DEFAULT_STABILITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub scenarios: Vec<String>,
    /// Number of training replicates to use; all simulated ones when unset.
    pub replicates: Option<usize>,
    /// Concurrent study cells; 0 uses one per available core.
    pub workers: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            scenarios: SCENARIO_NAMES.iter().map(|s| s.to_string()).collect(),
            replicates: None,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub simulation: SimulationSpec,
    pub mcmc: McmcConfig,
    pub evaluation: EvaluationSettings,
    pub study: StudySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Desk)
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            profile,
            simulation: SimulationSpec::default(),
            mcmc: profile.mcmc(),
            evaluation: EvaluationSettings::default(),
            study: StudySettings::default(),
        }
    }

    /// Layers `overrides` (a partial config tree) over the defaults of the
    /// chosen profile. `profile` beats a profile named in `overrides`.
    pub fn from_layers(profile: Option<Profile>, overrides: Option<Value>) -> Result<Self> {
        let mut overrides = overrides.unwrap_or(Value::Object(Default::default()));
        if !overrides.is_object() {
            return Err(Error::Config("configuration must be a table".into()));
        }
        let named = overrides
            .as_object_mut()
            .and_then(|o| o.remove("profile"))
            .map(|v| serde_json::from_value::<Profile>(v))
            .transpose()
            .map_err(|e| Error::Config(format!("profile: {e}")))?;
        let profile = profile.or(named).unwrap_or_default();
        let mut base = serde_json::to_value(Self::for_profile(profile))?;
        merge(&mut base, overrides);
        let config: Self =
            serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML config file, or a JSON run manifest whose `config` block is
    /// reused verbatim.
    pub fn load(path: impl AsRef<Path>, profile: Option<Profile>) -> Result<Self> {
        Self::from_layers(profile, Some(read_config_tree(path.as_ref())?))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.mcmc.validate()?;
        if let Some(t) = self.evaluation.t_star {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("evaluation.t_star = {t} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.evaluation.stability_threshold) {
            return Err(Error::Config("evaluation.stability_threshold must be in [0, 1]".into()));
        }
        if let Some(bad) = self
            .study
            .scenarios
            .iter()
            .find(|s| !SCENARIO_NAMES.contains(&s.as_str()))
        {
            return Err(Error::Config(format!("unknown study scenario `{bad}`")));
        }
        if self.study.replicates == Some(0) {
            return Err(Error::Config("study.replicates must be positive".into()));
        }
        Ok(())
    }
}

/// Raw config tree from a TOML file or the `config` field of a JSON manifest.
pub fn read_config_tree(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Value = serde_json::from_str(&text)?;
        manifest.get("config").cloned().ok_or_else(|| Error::Format {
            path: source,
            message: "manifest has no `config` block".into(),
        })
    } else {
        let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Format {
            path: source,
            message: e.to_string(),
        })?;
        Ok(serde_json::to_value(table)?)
    }
}

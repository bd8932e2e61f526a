//! Run configuration: one JSON document with optional sections `scenario` or `input`,
//! `tracker`, `attack`, `patch` and `metrics`. Unknown keys are rejected and every
//! error names the key path it concerns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::patchopt::OptimizeConfig;
use crate::scenario::{preset, ScenarioSpec};
use crate::tracker::TrackerConfig;

/// A synthetic scenario, named or spelled out.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ScenarioSpec>,
    /// Replaces the scenario's own seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Existing MOT files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    /// Sequence length; defaults to the last ground-truth frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSection>,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub patch: OptimizeConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidConfig(msg) => Error::Config {
            path: path.to_string(),
            msg,
        },
        other => Error::Config {
            path: path.to_string(),
            msg: other.to_string(),
        },
    }
}

impl RunConfig {
    /// The configured scenario, if any, with its seed override applied.
    pub fn scenario_spec(&self) -> Result<Option<ScenarioSpec>> {
        let Some(s) = &self.scenario else { return Ok(None) };
        let mut spec = match (&s.preset, &s.spec) {
            (Some(name), None) => preset(name).map_err(at("scenario.preset"))?,
            (None, Some(spec)) => spec.clone(),
            _ => {
                return Err(Error::Config {
                    path: "scenario".into(),
                    msg: "give exactly one of `preset` and `spec`".into(),
                })
            }
        };
        if let Some(seed) = s.seed {
            spec.seed = seed;
        }
        Ok(Some(spec))
    }

    /// Reseeds every random stream of the run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(s) = &mut self.scenario {
            s.seed = Some(seed);
        }
        self.attack.seed = seed;
        self.patch.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.is_some() && self.input.is_some() {
            return Err(Error::Config {
                path: "<root>".into(),
                msg: "`scenario` and `input` are alternatives; give at most one".into(),
            });
        }
        if let Some(spec) = self.scenario_spec()? {
            spec.validate().map_err(at("scenario.spec"))?;
        }
        self.tracker.validate().map_err(at("tracker"))?;
        self.attack.validate().map_err(at("attack"))?;
        self.patch.validate().map_err(at("patch"))?;
        self.metrics.validate().map_err(at("metrics"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serialises")
    }
}

/// Parses and validates a config. With `base`, relative input paths are resolved
/// against it and must exist.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path == "." { "<root>".into() } else { path },
            msg: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    if let (Some(input), Some(base)) = (&mut cfg.input, base) {
        let resolve = |p: &mut PathBuf, key: &str| -> Result<()> {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(Error::Config {
                    path: key.into(),
                    msg: format!("file not found: {}", p.display()),
                });
            }
            Ok(())
        };
        resolve(&mut input.gt, "input.gt")?;
        if let Some(d) = &mut input.detections {
            resolve(d, "input.detections")?;
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = super::read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, Some(base))
}

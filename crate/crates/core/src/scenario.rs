//! Scenario files: one walk (model, gait, modifications, outputs) per JSON
//! document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::gait::{GaitParameters, TrunkConfig};
use crate::model::{build_reference_mechanism, validate_model, MechanismModel};
use crate::modification::{CompensationSpec, ExtendSpec, ModificationStack, ScaleSpec};

pub const SCENARIO_SCHEMA_VERSION: &str = "gaitmod-scenario/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinModel {
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Builtin(BuiltinModel),
    File { file: PathBuf },
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Builtin(BuiltinModel::Reference)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnConfig {
    pub alpha_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    pub beta_ext_deg: f64,
}

/// Modification stack as written in scenario files (angles in degrees).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn: Option<TurnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extend: Option<ExtendConfig>,
    /// Joint id (as a string key) to offset in degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compensation: Option<BTreeMap<String, f64>>,
}

impl StackConfig {
    pub fn to_stack(&self) -> Result<ModificationStack> {
        let compensation = match &self.compensation {
            None => None,
            Some(map) => {
                let mut spec = CompensationSpec::default();
                for (key, deg) in map {
                    let id: usize = key.trim().parse().map_err(|_| {
                        GaitError::Config(format!("compensation key {key:?} is not a joint id"))
                    })?;
                    spec.offsets.insert(id, deg.to_radians());
                }
                Some(spec)
            }
        };
        let stack = ModificationStack {
            turn: self.turn.as_ref().map(|t| t.alpha_deg.to_radians()),
            scale: self.scale,
            extend: self.extend.as_ref().map(|e| ExtendSpec {
                beta_ext: e.beta_ext_deg.to_radians(),
            }),
            compensation,
        };
        stack.validate()?;
        Ok(stack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub report: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            csv: "zmp_trace.csv".into(),
            svg: "footprints.svg".into(),
            report: "report.json".into(),
        }
    }
}

fn default_n_steps() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: String,
    #[serde(default)]
    pub model: ModelSource,
    #[serde(default)]
    pub gait: GaitParameters,
    #[serde(default)]
    pub trunk: TrunkConfig,
    /// Number of half-steps.
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub stack: StackConfig,
    #[serde(default)]
    pub outputs: Outputs,
    /// Reserved for randomized sweeps; the built-in runs are deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION.to_string(),
            model: ModelSource::default(),
            gait: GaitParameters::default(),
            trunk: TrunkConfig::default(),
            n_steps: default_n_steps(),
            stack: StackConfig::default(),
            outputs: Outputs::default(),
            seed: 0,
        }
    }
}

impl Scenario {
    /// Parses and validates; parse errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let msg = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m);
            GaitError::Config(format!("line {} column {}: {msg}", e.line(), e.column()))
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            GaitError::Config(msg) => GaitError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(GaitError::Config(format!(
                "schema_version {:?} is not {SCENARIO_SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        if self.n_steps < 1 {
            return Err(GaitError::Config("n_steps must be at least 1".into()));
        }
        self.gait.validate()?;
        self.stack.to_stack()?;
        Ok(())
    }

    /// Builds or loads the model; relative model paths resolve against `base_dir`.
    pub fn build_model(&self, base_dir: &Path) -> Result<MechanismModel> {
        let model = match &self.model {
            ModelSource::Builtin(BuiltinModel::Reference) => build_reference_mechanism(),
            ModelSource::File { file } => MechanismModel::load(&base_dir.join(file))?,
        };
        let violations = validate_model(&model);
        if let Some(v) = violations.first() {
            return Err(GaitError::InvalidModel(format!(
                "{v} ({} violation(s))",
                violations.len()
            )));
        }
        Ok(model)
    }
}

// Copyright 2026 The fdp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Run configuration files.
//!
//! ```toml
//! command = "verify-moments"
//! seed = 7
//! replicates = 100000
//!
//! [output]
//! path = "moments.csv"
//! format = "csv"
//!
//! [procedure]
//! kind = "storey"
//! alpha = 0.1
//! lambda = 0.5
//!
//! [scenario]
//! m = 200
//! m1 = 80
//! alt = { kind = "dirac", c = 0.0 }
//! ```

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::{EstimatorSpec, WeightRule};
use crate::models::{AltModel, ScenarioConfig};
use crate::procedures::ProcedureSpec;
use crate::simulation::{default_m1_grid, CalibrationConfig, Identity, M1Rule, SweepConfig};

pub const MIN_REPLICATES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Parse,
    Validate,
    UnknownKey,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::Parse => "E_PARSE",
            ErrorCode::Validate => "E_VALIDATE",
            ErrorCode::UnknownKey => "E_UNKNOWN_KEY",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub code: ErrorCode,
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn validate(field: &str, message: impl fmt::Display) -> Self {
        Self {
            code: ErrorCode::Validate,
            field: Some(field.to_string()),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}: {field}: {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyMoments,
    FdrTable,
    ConsistencySweep,
    LfcCheck,
    CalibrateAorc,
    DiagnosticsQuotient,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyMoments => "verify-moments",
            Command::FdrTable => "fdr-table",
            Command::ConsistencySweep => "consistency-sweep",
            Command::LfcCheck => "lfc-check",
            Command::CalibrateAorc => "calibrate-aorc",
            Command::DiagnosticsQuotient => "diagnostics-quotient",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            Command::VerifyMoments,
            Command::FdrTable,
            Command::ConsistencySweep,
            Command::LfcCheck,
            Command::CalibrateAorc,
            Command::DiagnosticsQuotient,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Trivial,
    Storey,
    Combination { grid: Vec<f64>, weights: Vec<f64> },
    TailAdaptive { grid: Vec<f64> },
}

impl EstimatorConfig {
    fn to_spec(&self) -> EstimatorSpec {
        match self {
            EstimatorConfig::Trivial => EstimatorSpec::Trivial,
            EstimatorConfig::Storey => EstimatorSpec::Storey,
            EstimatorConfig::Combination { grid, weights } => EstimatorSpec::combination(grid.clone(), weights.clone()),
            EstimatorConfig::TailAdaptive { grid } => EstimatorSpec::IntervalCombination {
                grid: grid.clone(),
                weights: WeightRule::TailAdaptive,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcedureConfig {
    Bh { alpha: f64 },
    Storey { alpha: f64, lambda: f64 },
    Adaptive { alpha: f64, lambda: f64, estimator: EstimatorConfig },
    Quotient { alpha: f64, a: f64, b: f64 },
}

impl ProcedureConfig {
    pub fn to_spec(&self) -> ProcedureSpec {
        match self {
            ProcedureConfig::Bh { alpha } => ProcedureSpec::Bh { alpha: *alpha },
            ProcedureConfig::Storey { alpha, lambda } => ProcedureSpec::storey(*alpha, *lambda),
            ProcedureConfig::Adaptive {
                alpha,
                lambda,
                estimator,
            } => ProcedureSpec::AdaptiveCapped {
                alpha: *alpha,
                lambda: *lambda,
                estimator: estimator.to_spec(),
            },
            ProcedureConfig::Quotient { alpha, a, b } => ProcedureSpec::Quotient {
                alpha: *alpha,
                a: *a,
                b: *b,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBlock {
    pub m: usize,
    pub m1: usize,
    pub alt: AltModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBlock {
    pub m_grid: Vec<usize>,
    pub m1_rule: M1Rule,
    pub alt: AltModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfcBlock {
    pub m: usize,
    pub m1: usize,
    #[serde(default)]
    pub alts: Vec<AltModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub m: usize,
    pub b: f64,
    pub alpha: f64,
    pub tolerance: f64,
    pub m1_grid: Option<Vec<usize>>,
    /// Seed of the independent re-check of the achieved level.
    pub verify_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub replicates: u64,
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    pub procedure: Option<ProcedureConfig>,
    /// Several procedures, as an array of tables.
    pub procedures: Option<Vec<ProcedureConfig>>,
    pub scenario: Option<ScenarioBlock>,
    /// Several scenarios, as an array of tables.
    pub scenarios: Option<Vec<ScenarioBlock>>,
    pub sweep: Option<SweepBlock>,
    pub lfc: Option<LfcBlock>,
    pub calibration: Option<CalibrationBlock>,
    /// Identities checked by `verify-moments`; all applicable ones by default.
    pub identities: Option<Vec<String>>,
    /// Highest moment order tracked by `verify-moments`.
    pub max_order: Option<usize>,
    /// Multiplies every right-hand side; a value other than 1 must fail.
    pub fault_scale: Option<f64>,
    /// Adds the variance bounds to `verify-moments`.
    pub bounds: Option<bool>,
}

fn classify_toml(err: toml::de::Error) -> ConfigError {
    let message = err.message().to_string();
    let code = if message.contains("unknown field") {
        ErrorCode::UnknownKey
    } else {
        ErrorCode::Parse
    };
    ConfigError {
        code,
        field: None,
        message: err.to_string().trim_end().to_string(),
    }
}

/// Parses and validates a TOML document. In strict mode any unrecognised key
/// is an error; otherwise unknown keys are returned as warnings.
pub fn parse_config(text: &str, strict: bool) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(classify_toml)?;
    let mut ignored = Vec::new();
    let config: RunConfig =
        serde_ignored::deserialize(de, |path| ignored.push(key_path(&path))).map_err(classify_toml)?;
    if strict {
        if let Some(key) = ignored.first() {
            return Err(ConfigError {
                code: ErrorCode::UnknownKey,
                field: Some(key.clone()),
                message: "unknown key".into(),
            });
        }
    }
    config.validate()?;
    let warnings = ignored.into_iter().map(|k| format!("ignored unknown key {k}")).collect();
    Ok((config, warnings))
}

/// Dotted key path without the markers for optional values.
fn key_path(path: &serde_ignored::Path) -> String {
    path.to_string()
        .split('.')
        .filter(|seg| *seg != "?")
        .collect::<Vec<_>>()
        .join(".")
}

fn check(field: &str, result: crate::Result<()>) -> Result<(), ConfigError> {
    result.map_err(|e: Error| ConfigError::validate(field, e))
}

impl RunConfig {
    /// Checks every invariant eagerly, naming the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates < MIN_REPLICATES {
            return Err(ConfigError::validate(
                "replicates",
                format!("need at least {MIN_REPLICATES}, got {}", self.replicates),
            ));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::validate("workers", "must be positive"));
        }
        if self.procedure.is_some() && self.procedures.is_some() {
            return Err(ConfigError::validate("procedures", "give either procedure or procedures"));
        }
        if self.scenario.is_some() && self.scenarios.is_some() {
            return Err(ConfigError::validate("scenarios", "give either scenario or scenarios"));
        }
        let blocks = [
            ("procedure", self.procedure.is_some() || self.procedures.is_some()),
            ("scenario", self.scenario.is_some() || self.scenarios.is_some()),
            ("sweep", self.sweep.is_some()),
            ("lfc", self.lfc.is_some()),
            ("calibration", self.calibration.is_some()),
        ];
        let required: &[&str] = match self.command {
            Command::VerifyMoments | Command::FdrTable => &["procedure", "scenario"],
            Command::ConsistencySweep | Command::DiagnosticsQuotient => &["procedure", "sweep"],
            Command::LfcCheck => &["procedure", "lfc"],
            Command::CalibrateAorc => &["calibration"],
        };
        if let Some((name, _)) = blocks.iter().find(|(n, present)| required.contains(n) && !present) {
            return Err(ConfigError::validate(name, format!("required by {}", self.command.name())));
        }
        if let Some((name, _)) = blocks.iter().find(|(n, present)| !required.contains(n) && *present) {
            return Err(ConfigError::validate(name, format!("not used by {}", self.command.name())));
        }
        let command_only = [
            ("identities", self.identities.is_some()),
            ("max_order", self.max_order.is_some()),
            ("fault_scale", self.fault_scale.is_some()),
            ("bounds", self.bounds.is_some()),
        ];
        if self.command != Command::VerifyMoments {
            if let Some((name, _)) = command_only.iter().find(|(_, present)| *present) {
                return Err(ConfigError::validate(name, "only used by verify-moments"));
            }
        }

        let procedures = self.procedures();
        for (i, p) in procedures.iter().enumerate() {
            check(&self.indexed("procedure", i), p.validate())?;
        }
        for (i, s) in self.scenarios().into_iter().enumerate() {
            check(&self.indexed("scenario", i), s.validate())?;
        }
        if self.command == Command::DiagnosticsQuotient
            && procedures.iter().any(|p| !matches!(p, ProcedureSpec::Quotient { .. }))
        {
            return Err(ConfigError::validate("procedure", "diagnostics-quotient needs kind = \"quotient\""));
        }
        if matches!(self.command, Command::ConsistencySweep | Command::DiagnosticsQuotient) {
            for sweep in self.sweeps() {
                check("sweep", sweep.validate())?;
            }
        }
        if let Some(lfc) = &self.lfc {
            check(
                "lfc",
                ScenarioConfig::new(lfc.m, lfc.m1, AltModel::du(), self.seed).map(|_| ()),
            )?;
            for (i, alt) in lfc.alts.iter().enumerate() {
                check(&format!("lfc.alts[{i}]"), alt.validate())?;
            }
        }
        if let Some(cal) = self.calibration_config() {
            check("calibration", cal.validate())?;
        }
        if let Some(ids) = &self.identities {
            for (i, name) in ids.iter().enumerate() {
                let id: Identity = name
                    .parse()
                    .map_err(|e| ConfigError::validate(&format!("identities[{i}]"), e))?;
                if let Identity::Moment(k) = id {
                    if k > self.max_order.unwrap_or(4) {
                        return Err(ConfigError::validate(
                            &format!("identities[{i}]"),
                            format!("order {k} exceeds max_order"),
                        ));
                    }
                }
            }
        }
        if let Some(k) = self.max_order {
            if !(2..=crate::simulation::MAX_LEAVE_OUT).contains(&k) {
                return Err(ConfigError::validate("max_order", format!("{k} outside 2..=8")));
            }
        }
        if let Some(f) = self.fault_scale {
            if !(f.is_finite() && f > 0.0) {
                return Err(ConfigError::validate("fault_scale", "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn procedures(&self) -> Vec<ProcedureSpec> {
        self.procedure
            .iter()
            .chain(self.procedures.iter().flatten())
            .map(ProcedureConfig::to_spec)
            .collect()
    }

    /// Scenarios, all seeded with the run seed.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        self.scenario
            .iter()
            .chain(self.scenarios.iter().flatten())
            .map(|b| ScenarioConfig {
                m: b.m,
                m1: b.m1,
                alt: b.alt.clone(),
                seed: self.seed,
            })
            .collect()
    }

    fn indexed(&self, name: &str, i: usize) -> String {
        let plural = match name {
            "procedure" => self.procedures.is_some(),
            _ => self.scenarios.is_some(),
        };
        if plural {
            format!("{name}s[{i}]")
        } else {
            name.to_string()
        }
    }

    pub fn sweeps(&self) -> Vec<SweepConfig> {
        let Some(sweep) = &self.sweep else {
            return Vec::new();
        };
        self.procedures()
            .into_iter()
            .map(|procedure| SweepConfig {
                m_grid: sweep.m_grid.clone(),
                m1_rule: sweep.m1_rule,
                procedure,
                alt: sweep.alt.clone(),
                replicates: self.replicates,
                seed: self.seed,
            })
            .collect()
    }

    pub fn calibration_config(&self) -> Option<CalibrationConfig> {
        self.calibration.as_ref().map(|c| CalibrationConfig {
            m: c.m,
            b: c.b,
            alpha: c.alpha,
            m1_grid: c.m1_grid.clone().unwrap_or_else(|| default_m1_grid(c.m)),
            replicates: self.replicates,
            tolerance: c.tolerance,
            seed: self.seed,
        })
    }

    /// The configuration as JSON, without the worker count and output
    /// location, which do not affect results.
    pub fn echo(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("workers");
            obj.remove("output");
            obj.retain(|_, v| !v.is_null());
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "verify-moments"
seed = 1
replicates = 1000
[procedure]
kind = "storey"
alpha = 0.1
lambda = 0.5
[scenario]
m = 50
m1 = 10
alt = { kind = "dirac", c = 0.0 }
"#;

    #[test]
    fn minimal_config() {
        let (cfg, warnings) = parse_config(MINIMAL, true).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg.command, Command::VerifyMoments);
        assert_eq!(cfg.procedures(), vec![ProcedureSpec::storey(0.1, 0.5)]);
        assert_eq!(cfg.scenarios()[0].seed, 1);
    }

    #[test]
    fn quotient_boundary_is_rejected() {
        let text = MINIMAL.replace(
            "kind = \"storey\"\nalpha = 0.1\nlambda = 0.5",
            "kind = \"quotient\"\nalpha = 0.1\na = 0.9\nb = 0.0",
        );
        let err = parse_config(&text, true).unwrap_err();
        assert_eq!(err.code, ErrorCode::Validate);
        assert_eq!(err.field.as_deref(), Some("procedure"));
        assert!(err.message.contains("b=0 and 0<=a<1-alpha"), "{err}");
    }

    #[test]
    fn weights_must_sum_to_one() {
        let text = MINIMAL.replace(
            "kind = \"storey\"\nalpha = 0.1\nlambda = 0.5",
            "kind = \"adaptive\"\nalpha = 0.1\nlambda = 0.5\nestimator = { kind = \"combination\", grid = [0.5, 0.75, 1.0], weights = [0.5, 0.6] }",
        );
        let err = parse_config(&text, true).unwrap_err();
        assert_eq!(err.code, ErrorCode::Validate);
        assert!(err.message.contains("sum"), "{err}");
    }

    #[test]
    fn unknown_keys() {
        let text = MINIMAL.replace("seed = 1", "seed = 1\nsede = 2");
        let err = parse_config(&text, true).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownKey);
        assert_eq!(err.field.as_deref(), Some("sede"));
        let (_, warnings) = parse_config(&text, false).unwrap();
        assert_eq!(warnings.len(), 1);
        let nested = MINIMAL.replace("lambda = 0.5", "lambda = 0.5\nlamda = 0.4");
        assert_eq!(parse_config(&nested, true).unwrap_err().code, ErrorCode::UnknownKey);
        let in_scenario = MINIMAL.replace("m1 = 10", "m1 = 10\nm2 = 3");
        let err = parse_config(&in_scenario, true).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownKey);
        assert_eq!(err.field.as_deref(), Some("scenario.m2"));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_config("command = ", true).unwrap_err().code, ErrorCode::Parse);
        let missing = MINIMAL.replace("replicates = 1000\n", "");
        assert_eq!(parse_config(&missing, true).unwrap_err().code, ErrorCode::Parse);
    }

    #[test]
    fn block_requirements() {
        let few = MINIMAL.replace("replicates = 1000", "replicates = 10");
        assert_eq!(parse_config(&few, true).unwrap_err().field.as_deref(), Some("replicates"));
        let sweep = MINIMAL.replace("verify-moments", "consistency-sweep");
        assert_eq!(parse_config(&sweep, true).unwrap_err().field.as_deref(), Some("sweep"));
        let extra = format!("fault_scale = 1.1\n{}", MINIMAL.replace("verify-moments", "fdr-table"));
        let err = parse_config(&extra, true).unwrap_err();
        assert_eq!(err.code, ErrorCode::Validate);
    }

    #[test]
    fn several_procedures() {
        let text = MINIMAL.replace("[procedure]", "[[procedures]]")
            + "[[procedures]]\nkind = \"adaptive\"\nalpha = 0.1\nlambda = 0.5\nestimator = { kind = \"tail-adaptive\", grid = [0.5, 0.75, 1.0] }\n";
        let (cfg, _) = parse_config(&text, true).unwrap();
        assert_eq!(cfg.procedures().len(), 2);
        let bad = text.replace("lambda = 0.5\nestimator", "lambda = 0.6\nestimator");
        assert_eq!(parse_config(&bad, true).unwrap_err().field.as_deref(), Some("procedures[1]"));
    }

    #[test]
    fn echo_omits_run_details() {
        let text = format!("workers = 4\n{MINIMAL}").replace("[procedure]", "[output]\npath = \"x.csv\"\n[procedure]");
        let (cfg, _) = parse_config(&text, true).unwrap();
        let echo = cfg.echo();
        assert!(echo.get("workers").is_none());
        assert!(echo.get("output").is_none());
        assert_eq!(echo["seed"], 1);
    }
}

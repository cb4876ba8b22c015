//! JSON experiment configuration, shared by every subcommand.
//!
//! One schema, documented in the README. Unknown keys are rejected at every
//! level so a typo'd field fails loudly instead of silently falling back to
//! a default. Arm indices in configs are 1-based, like all other I/O.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use nsdb::harness::PolicySpec;
use nsdb::prefs::{
    flat_gap_matrix, ladder_matrix, GapStyle, LinkKind, PreferenceMatrix, PreferenceSequence,
    PrefsError, UtilityModel,
};

/// Stamped into every manifest and JSON summary the binary writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum ConfigError {
    /// Bad file, schema, or parameter; maps to exit code 1.
    Invalid(String),
    /// The described environment fails validation; maps to exit code 2.
    Env(PrefsError),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Invalid(msg) => write!(f, "{msg}"),
            ConfigError::Env(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    /// Single environment; used by `run`, `measures`, `concentration`.
    #[serde(default)]
    pub env: Option<EnvSpec>,
    /// Labeled environment grid; used by `sweep`.
    #[serde(default)]
    pub envs: Option<Vec<LabeledEnv>>,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    /// Seed of the first run; run `i` uses `base_seed + i`.
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub concentration: Option<ConcentrationOpts>,
}

fn default_base_seed() -> u64 {
    1
}

fn default_num_seeds() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledEnv {
    pub label: String,
    pub env: EnvSpec,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationOpts {
    pub c1: f64,
    pub trials: usize,
}

/// Environment generator. The JSON form is an object whose `type` field
/// names the generator; the remaining fields are generator parameters.
#[derive(Clone, Debug)]
pub enum EnvSpec {
    Stationary(StationaryEnv),
    ScriptedRotation(RotationEnv),
    Piecewise(PiecewiseEnv),
    UtilityDrift(UtilityEnv),
}

// Hand-rolled tag dispatch: serde's internally-tagged enums buffer variant
// fields in a way that bypasses deny_unknown_fields, and rejecting unknown
// keys here is part of the config contract.
impl<'de> Deserialize<'de> for EnvSpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        use serde::de::Error;
        let mut map = serde_json::Map::deserialize(deserializer)?;
        let tag = map
            .remove("type")
            .ok_or_else(|| D::Error::custom("env needs a `type` field"))?;
        let Value::String(tag) = tag else {
            return Err(D::Error::custom("env `type` must be a string"));
        };
        let rest = Value::Object(map);
        let parsed = match tag.as_str() {
            "stationary" => serde_json::from_value(rest).map(EnvSpec::Stationary),
            "scripted_rotation" => serde_json::from_value(rest).map(EnvSpec::ScriptedRotation),
            "piecewise" => serde_json::from_value(rest).map(EnvSpec::Piecewise),
            "utility_drift" => serde_json::from_value(rest).map(EnvSpec::UtilityDrift),
            other => {
                return Err(D::Error::custom(format!(
                    "unknown env type `{other}`; expected stationary, scripted_rotation, \
                     piecewise, or utility_drift"
                )))
            }
        };
        parsed.map_err(|e| D::Error::custom(format!("env ({tag}): {e}")))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryEnv {
    pub arms: usize,
    /// 1-based index of the winning arm.
    pub winner: usize,
    pub gap: f64,
    #[serde(default = "default_style")]
    pub style: GapStyle,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationEnv {
    pub arms: usize,
    /// Number of winner changes; segments are equally spaced.
    pub switches: usize,
    pub gap: f64,
    #[serde(default = "default_style")]
    pub style: GapStyle,
    /// Winners cycle through the first `rotate` arms.
    pub rotate: usize,
}

fn default_style() -> GapStyle {
    GapStyle::Flat
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseEnv {
    pub segments: Vec<SegmentSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// First round the matrix applies to; the first segment starts at 1.
    pub start: usize,
    /// Row-major win probabilities.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityEnv {
    pub keyframes: Vec<KeyframeSpec>,
    pub link: LinkSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeSpec {
    pub round: usize,
    pub utilities: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// `linear` or `logistic`.
    pub kind: String,
    pub scale: f64,
}

impl LinkSpec {
    fn to_link(&self) -> Result<LinkKind, ConfigError> {
        match self.kind.as_str() {
            "linear" => Ok(LinkKind::Linear { scale: self.scale }),
            "logistic" => Ok(LinkKind::Logistic { scale: self.scale }),
            other => Err(ConfigError::Invalid(format!(
                "unknown link kind `{other}`; expected linear or logistic"
            ))),
        }
    }
}

impl EnvSpec {
    pub fn build(&self, horizon: usize) -> Result<PreferenceSequence, ConfigError> {
        match self {
            EnvSpec::Stationary(s) => {
                if s.winner == 0 || s.winner > s.arms {
                    return Err(ConfigError::Invalid(format!(
                        "winner {} out of range 1..={}",
                        s.winner, s.arms
                    )));
                }
                let m = match s.style {
                    GapStyle::Flat => flat_gap_matrix(s.arms, s.winner - 1, s.gap),
                    GapStyle::Ladder => ladder_matrix(s.arms, s.winner - 1, s.gap),
                }
                .map_err(ConfigError::Env)?;
                PreferenceSequence::stationary(m, horizon).map_err(ConfigError::Env)
            }
            EnvSpec::ScriptedRotation(r) => PreferenceSequence::scripted_rotation(
                r.arms, horizon, r.switches, r.gap, r.style, r.rotate,
            )
            .map_err(ConfigError::Env),
            EnvSpec::Piecewise(p) => {
                let mut segments = Vec::with_capacity(p.segments.len());
                for seg in &p.segments {
                    let m = PreferenceMatrix::from_rows(seg.rows.clone())
                        .map_err(ConfigError::Env)?;
                    segments.push((seg.start, m));
                }
                PreferenceSequence::piecewise(segments, horizon).map_err(ConfigError::Env)
            }
            EnvSpec::UtilityDrift(u) => {
                let link = u.link.to_link()?;
                let keyframes = u
                    .keyframes
                    .iter()
                    .map(|k| (k.round, k.utilities.clone()))
                    .collect();
                let model = UtilityModel::new(keyframes, link).map_err(ConfigError::Env)?;
                PreferenceSequence::utility_drift(model, horizon).map_err(ConfigError::Env)
            }
        }
    }
}

pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hash of the raw config bytes, recorded in output manifests.
    pub sha256: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let config = serde_json::from_slice(&bytes)
        .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig { config, sha256: sha256_hex(&bytes) })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

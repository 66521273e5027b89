//! Run configuration: a single JSON document with sections `stream`,
//! `oracle`, `templates`, `weg`, and `run`. Unknown keys are errors, so typos
//! fail fast.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{builtin, CompactProfile, OracleProfile};
use crate::stream::{SegmentSpec, StreamSpec, DEFAULT_FRAME_INTERVAL};
use crate::weg::{RunMode, Variant, WegConfig};

/// Stream section: synthetic generator or recorded trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamSource {
    Synthetic(SyntheticStream),
    Trace(TraceStream),
}

/// Synthetic stream settings; `seed` defaults to a value derived from the
/// run seed and repetition index, so repetitions see fresh streams unless a
/// stream seed is pinned.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticStream {
    pub num_classes: u32,
    pub segments: Vec<SegmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_interval: Option<f64>,
}

/// Trace replay settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStream {
    pub trace: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_interval: Option<f64>,
}

impl StreamSource {
    pub fn frame_interval(&self) -> f64 {
        match self {
            StreamSource::Synthetic(s) => s.frame_interval.unwrap_or(DEFAULT_FRAME_INTERVAL),
            StreamSource::Trace(t) => t.frame_interval.unwrap_or(DEFAULT_FRAME_INTERVAL),
        }
    }

    /// Build the generator spec for one repetition.
    pub fn synthetic_spec(&self, stream_seed: u64) -> Option<StreamSpec> {
        match self {
            StreamSource::Synthetic(s) => Some(StreamSpec {
                num_classes: s.num_classes,
                segments: s.segments.clone(),
                seed: s.seed.unwrap_or(stream_seed),
                frame_interval: self.frame_interval(),
            }),
            StreamSource::Trace(_) => None,
        }
    }
}

/// Oracle section: a builtin name or an inline profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleRef {
    Builtin(String),
    Inline(OracleProfile),
}

impl OracleRef {
    pub fn resolve(&self) -> Result<OracleProfile> {
        let oracle = match self {
            OracleRef::Builtin(name) => builtin::oracle_by_name(name)
                .ok_or_else(|| Error::config(format!("unknown builtin oracle {name:?}")))?,
            OracleRef::Inline(profile) => *profile,
        };
        oracle.validate()?;
        Ok(oracle)
    }
}

/// Template entry: a builtin name or an inline profile.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum TemplateRef {
    Builtin(String),
    Inline(CompactProfile),
}

// Hand-rolled: untagged-enum buffering cannot deserialize the integer keys
// of param_table, so route the inline case through a concrete Value.
impl<'de> Deserialize<'de> for TemplateRef {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::String(name) => Ok(TemplateRef::Builtin(name)),
            other => serde_json::from_value(other)
                .map(TemplateRef::Inline)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl TemplateRef {
    pub fn resolve(&self) -> Result<CompactProfile> {
        let template = match self {
            TemplateRef::Builtin(name) => builtin::template_by_name(name)
                .ok_or_else(|| Error::config(format!("unknown builtin template {name:?}")))?,
            TemplateRef::Inline(profile) => profile.clone(),
        };
        template.validate()?;
        Ok(template)
    }
}

/// Which policy drives the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Weg,
    OracleOnly,
}

fn default_policy() -> Policy {
    Policy::Weg
}
fn default_repetitions() -> usize {
    1
}
fn default_mode() -> RunMode {
    RunMode::Streaming
}

/// Run section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            policy: default_policy(),
            seed: 0,
            repetitions: default_repetitions(),
            mode: default_mode(),
        }
    }
}

/// The full run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub stream: StreamSource,
    pub oracle: OracleRef,
    #[serde(default)]
    pub templates: Vec<TemplateRef>,
    #[serde(default)]
    pub weg: Option<WegConfig>,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Stable short identifier for the configuration (first 8 hex chars of
    /// the SHA-256 of the canonical JSON form). serde_json maps are sorted,
    /// so formatting differences in the source file do not matter.
    pub fn run_id(&self) -> String {
        let canonical = serde_json::to_string(&self.to_value()).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..4].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Effective controller config (defaults when the section is omitted).
    pub fn weg_config(&self) -> WegConfig {
        self.weg.clone().unwrap_or_default()
    }

    /// Cross-section validation. Trace streams are validated lazily when the
    /// file is read.
    pub fn validate(&self) -> Result<()> {
        let oracle = self.oracle.resolve()?;
        let weg = self.weg_config();
        weg.validate()?;
        if self.run.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        let templates: Vec<CompactProfile> =
            self.templates.iter().map(|t| t.resolve()).collect::<Result<_>>()?;
        if self.run.policy == Policy::Weg {
            if templates.is_empty() {
                return Err(Error::config("policy weg needs at least one template"));
            }
            for t in &templates {
                if t.run_cost_ms >= oracle.cost_ms {
                    return Err(Error::config(format!(
                        "template {}: run cost {} ms is not below oracle cost {} ms",
                        t.name, t.run_cost_ms, oracle.cost_ms
                    )));
                }
            }
        }
        if let StreamSource::Synthetic(s) = &self.stream {
            if s.num_classes != oracle.num_classes {
                return Err(Error::config(format!(
                    "stream num_classes {} does not match oracle num_classes {}",
                    s.num_classes, oracle.num_classes
                )));
            }
            crate::stream::validate_spec(&StreamSpec {
                num_classes: s.num_classes,
                segments: s.segments.clone(),
                seed: 0,
                frame_interval: self.stream.frame_interval(),
            })?;
        }
        Ok(())
    }

    /// The face-task reference scenario: face-like oracle, F2-like template,
    /// face controller defaults.
    pub fn face_scenario(segments: Vec<SegmentSpec>, seed: u64, repetitions: usize) -> RunConfig {
        RunConfig {
            stream: StreamSource::Synthetic(SyntheticStream {
                num_classes: builtin::face_like_oracle().num_classes,
                segments,
                seed: None,
                frame_interval: None,
            }),
            oracle: OracleRef::Builtin("face-like".to_string()),
            templates: vec![TemplateRef::Builtin("F2-like".to_string())],
            weg: Some(WegConfig::face_defaults()),
            run: RunSection {
                policy: Policy::Weg,
                seed,
                repetitions,
                mode: RunMode::Streaming,
            },
        }
    }
}

/// Parse a `--policy` override: `weg`, `oracle`, `fixed-window=<w>`,
/// `variable-skew`, or `simple-exit`.
pub fn parse_policy_override(text: &str) -> Result<(Policy, Option<Variant>)> {
    match text {
        "weg" => Ok((Policy::Weg, Some(Variant::Standard))),
        "oracle" | "oracle_only" | "oracle-only" => Ok((Policy::OracleOnly, None)),
        "variable-skew" | "variable_training_skew" => {
            Ok((Policy::Weg, Some(Variant::VariableTrainingSkew)))
        }
        "simple-exit" | "simple_exit" => Ok((Policy::Weg, Some(Variant::SimpleExit))),
        other => {
            if let Some(w) = other
                .strip_prefix("fixed-window=")
                .or_else(|| other.strip_prefix("fixed_window="))
            {
                let w: usize = w
                    .parse()
                    .map_err(|_| Error::config(format!("invalid fixed window size {w:?}")))?;
                Ok((Policy::Weg, Some(Variant::FixedWindow { w })))
            } else {
                Err(Error::config(format!(
                    "unknown policy {other:?}; expected weg | oracle | fixed-window=<w> | variable-skew | simple-exit"
                )))
            }
        }
    }
}

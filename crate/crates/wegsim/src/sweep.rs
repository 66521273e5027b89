//! Parameter sweeps: rerun a base configuration with one field set to each
//! of a list of values.
//!
//! The parameter is addressed by a dotted path into the configuration JSON
//! (`weg.epsilon`, `run.seed`, `stream.segments.0.length`). A `*` component
//! fans out over every element of an array, which is how per-segment fields
//! like segment length sweep in one shot.

use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sim::{run_simulation_indexed, RunReport};

/// Set `path` to `value` inside `root`, in place.
pub fn set_path(root: &mut Value, path: &str, value: &Value) -> Result<()> {
    fn apply(node: &mut Value, parts: &[&str], value: &Value, full: &str) -> Result<()> {
        let Some((head, rest)) = parts.split_first() else {
            *node = value.clone();
            return Ok(());
        };
        match node {
            Value::Object(map) => {
                let child = map.get_mut(*head).ok_or_else(|| {
                    Error::config(format!("unknown parameter path {full:?} (no key {head:?})"))
                })?;
                apply(child, rest, value, full)
            }
            Value::Array(items) => {
                if *head == "*" {
                    if items.is_empty() {
                        return Err(Error::config(format!(
                            "parameter path {full:?} fans out over an empty array"
                        )));
                    }
                    for item in items.iter_mut() {
                        apply(item, rest, value, full)?;
                    }
                    Ok(())
                } else {
                    let idx: usize = head.parse().map_err(|_| {
                        Error::config(format!(
                            "parameter path {full:?}: {head:?} is not an array index"
                        ))
                    })?;
                    let child = items.get_mut(idx).ok_or_else(|| {
                        Error::config(format!("parameter path {full:?}: index {idx} out of range"))
                    })?;
                    apply(child, rest, value, full)
                }
            }
            _ => Err(Error::config(format!(
                "parameter path {full:?}: {head:?} addresses a scalar"
            ))),
        }
    }
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("malformed parameter path {path:?}")));
    }
    apply(root, &parts, value, path)
}

/// Parse one sweep value: JSON literal when possible (numbers, booleans),
/// bare string otherwise (enum names).
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// One sweep point and its run.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: Value,
    pub report: RunReport,
}

/// Run the base config once per value of `param`. Each point's randomness
/// derivation folds in the point index, and each point keeps the configured
/// number of repetitions. Rows carry the base configuration's `run_id`, so
/// every row of one sweep shares it.
pub fn sweep(base: &RunConfig, param: &str, values: &[Value]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let base_value = base.to_value();
    let base_run_id = base.run_id();
    let mut points = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut value = base_value.clone();
        set_path(&mut value, param, v)?;
        let config = RunConfig::from_value(value)?;
        let mut report = run_simulation_indexed(&config, Some(i as u64))?;
        for rep in &mut report.repetitions {
            rep.metrics.run_id = base_run_id.clone();
        }
        points.push(SweepPoint { value: v.clone(), report });
    }
    Ok(points)
}

//! Stochastic classifier models and their cost parameters.
//!
//! Classifiers are simulated by their statistics, not executed: the oracle is
//! (accuracy `a*`, cost `R*`); a compact template is (run cost `R_h`,
//! retargeting cost `R_T`, and a table of specialization parameters per
//! dominant-set size); a specialized model is a template retargeted to a
//! concrete dominant set, with parameters interpolated at its size.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::ClassLabel;

/// The large always-available classifier.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleProfile {
    /// Probability `a*` of returning the true label.
    pub accuracy: f64,
    /// Cost `R*` per invocation, in milliseconds.
    pub cost_ms: f64,
    /// Class universe size `N`.
    pub num_classes: u32,
}

impl OracleProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.accuracy > 0.0 && self.accuracy <= 1.0) {
            return Err(Error::config("oracle accuracy must be in (0, 1]"));
        }
        if !(self.cost_ms > 0.0) {
            return Err(Error::config("oracle cost_ms must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("oracle num_classes must be at least 2"));
        }
        Ok(())
    }
}

/// Classify `true_label` with the oracle: returns the true label with
/// probability `a*`, otherwise a uniform draw over the other `N - 1` labels.
/// The `R*` charge is the caller's responsibility.
pub fn oracle_classify<R: Rng + ?Sized>(
    profile: &OracleProfile,
    true_label: ClassLabel,
    rng: &mut R,
) -> ClassLabel {
    if profile.accuracy >= 1.0 || rng.gen::<f64>() < profile.accuracy {
        return true_label;
    }
    let wrong = rng.gen_range(0..profile.num_classes - 1);
    ClassLabel(if wrong >= true_label.0 { wrong + 1 } else { wrong })
}

/// Behavior of a specialized model, conditioned on whether the input is in
/// the dominant set.
///
/// `a_in`: in-dominant inputs labeled correctly. `e_in_out`: in-dominant
/// inputs labeled "other" (these cascade). `a_out`: out-of-dominant inputs
/// labeled "other". Residual in-dominant mass (`1 - a_in - e_in_out`) is a
/// wrong in-dominant label; residual out mass (`1 - a_out`) is a false
/// positive inside the dominant set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecializationParams {
    pub a_in: f64,
    pub e_in_out: f64,
    pub a_out: f64,
}

impl SpecializationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a_in", self.a_in), ("e_in_out", self.e_in_out), ("a_out", self.a_out)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.a_in + self.e_in_out > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "a_in + e_in_out must not exceed 1 (got {} + {})",
                self.a_in, self.e_in_out
            )));
        }
        Ok(())
    }
}

/// A compact model architecture pretrained offline, retargetable at runtime.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactProfile {
    pub name: String,
    /// Cost `R_h` per invocation, in milliseconds.
    pub run_cost_ms: f64,
    /// Flat retargeting cost `R_T`, in seconds.
    pub retarget_cost_s: f64,
    /// Specialization parameters keyed by dominant-set size.
    pub param_table: BTreeMap<u32, SpecializationParams>,
}

impl CompactProfile {
    pub fn validate(&self) -> Result<()> {
        if self.param_table.is_empty() {
            return Err(Error::config(format!("template {}: empty param_table", self.name)));
        }
        if !(self.run_cost_ms > 0.0) {
            return Err(Error::config(format!("template {}: run_cost_ms must be positive", self.name)));
        }
        if !(self.retarget_cost_s >= 0.0) {
            return Err(Error::config(format!(
                "template {}: retarget_cost_s must be non-negative",
                self.name
            )));
        }
        if self.param_table.keys().any(|&n| n == 0) {
            return Err(Error::config(format!("template {}: param_table key 0 invalid", self.name)));
        }
        for params in self.param_table.values() {
            params.validate()?;
        }
        Ok(())
    }
}

/// Componentwise linear interpolation of the parameter table at size `n`:
/// exact at table keys, clamped to the nearest endpoint outside the key
/// range.
pub fn interpolate_profile(table: &BTreeMap<u32, SpecializationParams>, n: u32) -> SpecializationParams {
    debug_assert!(!table.is_empty());
    if let Some(exact) = table.get(&n) {
        return *exact;
    }
    let below = table.range(..=n).next_back();
    let above = table.range(n..).next();
    match (below, above) {
        (Some((&lo, a)), Some((&hi, b))) => {
            let t = (n - lo) as f64 / (hi - lo) as f64;
            SpecializationParams {
                a_in: a.a_in + t * (b.a_in - a.a_in),
                e_in_out: a.e_in_out + t * (b.e_in_out - a.e_in_out),
                a_out: a.a_out + t * (b.a_out - a.a_out),
            }
        }
        (Some((_, a)), None) => *a,
        (None, Some((_, b))) => *b,
        (None, None) => unreachable!("param_table is never empty"),
    }
}

/// A template retargeted to a concrete dominant set.
#[derive(Clone, Debug)]
pub struct SpecializedModel {
    pub template_name: String,
    /// Cost per invocation inherited from the template.
    pub run_cost_ms: f64,
    /// Sorted dominant labels `D`.
    pub dominant_set: Vec<u32>,
    /// Parameters interpolated at `|D|`.
    pub params: SpecializationParams,
    /// Skew the retargeting used. Recorded; does not alter `params` here.
    pub training_skew: f64,
}

impl SpecializedModel {
    pub fn contains(&self, label: ClassLabel) -> bool {
        self.dominant_set.binary_search(&label.0).is_ok()
    }
}

/// Retarget `template` to `dominant_set`. Deterministic; the caller charges
/// `retarget_cost_s` exactly once per call.
pub fn specialize(
    template: &CompactProfile,
    dominant_set: &[u32],
    training_skew: f64,
) -> Result<SpecializedModel> {
    if dominant_set.is_empty() {
        return Err(Error::domain("specialize called with an empty dominant set"));
    }
    let mut dominant: Vec<u32> = dominant_set.to_vec();
    dominant.sort_unstable();
    dominant.dedup();
    if dominant.len() != dominant_set.len() {
        return Err(Error::domain("dominant set has duplicate labels"));
    }
    let params = interpolate_profile(&template.param_table, dominant.len() as u32);
    Ok(SpecializedModel {
        template_name: template.name.clone(),
        run_cost_ms: template.run_cost_ms,
        dominant_set: dominant,
        params,
        training_skew,
    })
}

/// Output of a specialized model: an in-dominant label, or the catch-all
/// "other" class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecializedOutput {
    InContext(ClassLabel),
    Other,
}

/// Classify with a specialized model.
///
/// In-dominant inputs: correct with `a_in`, "other" with `e_in_out`,
/// otherwise a wrong label uniform over `D \ {true}` (emitted as `Other`
/// when `|D| = 1`, preserving probability mass and forcing a cascade).
/// Out-of-dominant inputs: "other" with `a_out`, otherwise a false positive
/// uniform over `D`.
pub fn specialized_classify<R: Rng + ?Sized>(
    model: &SpecializedModel,
    true_label: ClassLabel,
    rng: &mut R,
) -> SpecializedOutput {
    let d = &model.dominant_set;
    let r: f64 = rng.gen();
    if model.contains(true_label) {
        if r < model.params.a_in {
            SpecializedOutput::InContext(true_label)
        } else if r < model.params.a_in + model.params.e_in_out || d.len() == 1 {
            // A miss with no wrong in-dominant label available (|D| = 1)
            // is emitted as Other too; mass is preserved and the call
            // cascades.
            SpecializedOutput::Other
        } else {
            let pos = d.binary_search(&true_label.0).expect("label is in D");
            let k = rng.gen_range(0..d.len() - 1);
            let k = if k >= pos { k + 1 } else { k };
            SpecializedOutput::InContext(ClassLabel(d[k]))
        }
    } else if r < model.params.a_out {
        SpecializedOutput::Other
    } else {
        SpecializedOutput::InContext(ClassLabel(d[rng.gen_range(0..d.len())]))
    }
}

/// Built-in profiles with representative costs. The specialization parameter
/// tables are plausible defaults for simulation studies, not measurements;
/// override them in the run configuration when profiling data is available.
pub mod builtin {
    use super::*;

    fn table(entries: &[(u32, f64, f64, f64)]) -> BTreeMap<u32, SpecializationParams> {
        entries
            .iter()
            .map(|&(n, a_in, e_in_out, a_out)| (n, SpecializationParams { a_in, e_in_out, a_out }))
            .collect()
    }

    /// Face-recognition-class oracle: 2622 classes, 95.8% top-1, 28.8 ms.
    pub fn face_like_oracle() -> OracleProfile {
        OracleProfile {
            accuracy: 0.958,
            cost_ms: 28.8,
            num_classes: 2622,
        }
    }

    /// Object-recognition-class oracle: 1000 classes, 68.9% top-1, 11.0 ms.
    pub fn object_like_oracle() -> OracleProfile {
        OracleProfile {
            accuracy: 0.689,
            cost_ms: 11.0,
            num_classes: 1000,
        }
    }

    /// Scene-recognition-class oracle: 205 classes, 58.1% top-1, 28.8 ms.
    pub fn scene_like_oracle() -> OracleProfile {
        OracleProfile {
            accuracy: 0.581,
            cost_ms: 28.8,
            num_classes: 205,
        }
    }

    /// Compact face template: 1.93 ms per call, 4 s retarget.
    pub fn f2_like() -> CompactProfile {
        CompactProfile {
            name: "F2-like".to_string(),
            run_cost_ms: 1.93,
            retarget_cost_s: 4.0,
            param_table: table(&[
                (1, 0.95, 0.02, 0.93),
                (5, 0.90, 0.05, 0.90),
                (10, 0.86, 0.08, 0.88),
                (20, 0.80, 0.12, 0.85),
                (50, 0.70, 0.18, 0.80),
            ]),
        }
    }

    /// Compact object template: 2.8 ms per call, 14 s retarget.
    pub fn o2_like() -> CompactProfile {
        CompactProfile {
            name: "O2-like".to_string(),
            run_cost_ms: 2.8,
            retarget_cost_s: 14.0,
            param_table: table(&[
                (1, 0.93, 0.03, 0.92),
                (5, 0.88, 0.06, 0.88),
                (10, 0.85, 0.08, 0.85),
                (20, 0.78, 0.12, 0.82),
                (50, 0.68, 0.20, 0.78),
            ]),
        }
    }

    /// Compact scene template: 2.44 ms per call, 14 s retarget.
    pub fn s2_like() -> CompactProfile {
        CompactProfile {
            name: "S2-like".to_string(),
            run_cost_ms: 2.44,
            retarget_cost_s: 14.0,
            param_table: table(&[
                (1, 0.90, 0.04, 0.90),
                (5, 0.85, 0.07, 0.86),
                (10, 0.80, 0.10, 0.82),
                (20, 0.72, 0.15, 0.78),
                (50, 0.60, 0.22, 0.72),
            ]),
        }
    }

    /// Oracle builtin by name, if known.
    pub fn oracle_by_name(name: &str) -> Option<OracleProfile> {
        match name {
            "face-like" => Some(face_like_oracle()),
            "object-like" => Some(object_like_oracle()),
            "scene-like" => Some(scene_like_oracle()),
            _ => None,
        }
    }

    /// Template builtin by name, if known.
    pub fn template_by_name(name: &str) -> Option<CompactProfile> {
        match name {
            "F2-like" => Some(f2_like()),
            "O2-like" => Some(o2_like()),
            "S2-like" => Some(s2_like()),
            _ => None,
        }
    }
}

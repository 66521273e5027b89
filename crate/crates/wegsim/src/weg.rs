//! The windowed ε-greedy controller.
//!
//! A per-input state machine with three phases:
//!
//! 1. **Window initialization** — run the oracle for `w_min` samples; if the
//!    dominant classes match the previous epoch's within `tau_r`, prepend the
//!    previous window (the epoch continues and the window grows).
//! 2. **Template selection** — estimate the cascade accuracy for each
//!    template at the observed dominant set and skew; retarget the cheapest
//!    passing template, or keep exploring with the oracle.
//! 3. **Specialized classification** — exploit the cascade, auditing it with
//!    an ε-probability oracle check, until the running accuracy estimate
//!    drops below the oracle bar or the audited mismatch ratio exceeds
//!    `tau_fp`; then start a new epoch.
//!
//! Ablation variants disable the adaptive window, derive the training skew
//! from the observed skew (degrading out-of-set accuracy), or replace the
//! exit test with a plain skew comparison.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{cascaded_classify, estimate_accuracy, CascadedClassifier};
use crate::error::{Error, Result};
use crate::models::{
    interpolate_profile, oracle_classify, specialize, CompactProfile, OracleProfile,
    SpecializationParams,
};
use crate::stream::ClassLabel;

/// Controller variant: the standard algorithm or one of its ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Adaptive window, fixed training skew, estimate-based exit.
    Standard,
    /// Disable window merging; always use exactly `w` samples.
    FixedWindow { w: usize },
    /// Train at the observed skew; the specialized model's `a_out` is
    /// multiplied by the configured degradation factor.
    VariableTrainingSkew,
    /// Exit when the running skew estimate falls below its value at entry.
    SimpleExit,
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Standard => "weg".to_string(),
            Variant::FixedWindow { w } => format!("fixed_window_{w}"),
            Variant::VariableTrainingSkew => "variable_training_skew".to_string(),
            Variant::SimpleExit => "simple_exit".to_string(),
        }
    }
}

/// One step of the minimum-support rule: windows of at least `min_window`
/// use `support`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportStep {
    pub min_window: usize,
    pub support: usize,
}

fn default_support_rule() -> Vec<SupportStep> {
    vec![
        SupportStep { min_window: 1, support: 2 },
        SupportStep { min_window: 90, support: 3 },
    ]
}

fn default_w_min() -> usize {
    30
}
fn default_tau_r() -> usize {
    2
}
fn default_tau_a() -> f64 {
    0.05
}
fn default_tau_fp() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_training_skew() -> f64 {
    0.5
}
fn default_max_window() -> usize {
    300
}
fn default_variant() -> Variant {
    Variant::Standard
}
fn default_a_out_degradation() -> f64 {
    0.6
}

/// Controller hyper-parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WegConfig {
    /// Samples collected in the window-initialization phase.
    #[serde(default = "default_w_min")]
    pub w_min: usize,
    /// Maximum dominant-set symmetric difference treated as "same epoch".
    #[serde(default = "default_tau_r")]
    pub tau_r: usize,
    /// Accuracy margin over the oracle required to specialize. May be
    /// negative (face-like tasks run at -0.05).
    #[serde(default = "default_tau_a")]
    pub tau_a: f64,
    /// Exit threshold on the audited mismatch ratio `n*/(n_c ε)`.
    #[serde(default = "default_tau_fp")]
    pub tau_fp: f64,
    /// Probability of auditing a non-cascaded result with the oracle.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Minimum-support rule by window size.
    #[serde(default = "default_support_rule")]
    pub support_rule: Vec<SupportStep>,
    /// Fixed training skew passed to the specializer.
    #[serde(default = "default_training_skew")]
    pub training_skew: f64,
    /// Hard cap on the stored window length.
    #[serde(default = "default_max_window")]
    pub max_window: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Multiplier applied to the specialized model's `a_out` under the
    /// variable-training-skew ablation. Calibration knob, not a measurement.
    #[serde(default = "default_a_out_degradation")]
    pub a_out_degradation: f64,
}

impl Default for WegConfig {
    fn default() -> Self {
        WegConfig {
            w_min: default_w_min(),
            tau_r: default_tau_r(),
            tau_a: default_tau_a(),
            tau_fp: default_tau_fp(),
            epsilon: default_epsilon(),
            support_rule: default_support_rule(),
            training_skew: default_training_skew(),
            max_window: default_max_window(),
            variant: default_variant(),
            a_out_degradation: default_a_out_degradation(),
        }
    }
}

impl WegConfig {
    /// Face-task defaults: negative accuracy margin, 50% training skew.
    pub fn face_defaults() -> Self {
        WegConfig { tau_a: -0.05, training_skew: 0.5, ..WegConfig::default() }
    }

    /// Object-task defaults: +0.05 margin, 60% training skew.
    pub fn object_defaults() -> Self {
        WegConfig { tau_a: 0.05, training_skew: 0.6, ..WegConfig::default() }
    }

    /// Scene-task defaults: +0.05 margin, 70% training skew.
    pub fn scene_defaults() -> Self {
        WegConfig { tau_a: 0.05, training_skew: 0.7, ..WegConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_min == 0 {
            return Err(Error::config("w_min must be at least 1"));
        }
        if self.max_window < self.w_min {
            return Err(Error::config("max_window must be at least w_min"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon must be in (0, 1)"));
        }
        if !(self.tau_fp > 0.0) {
            return Err(Error::config("tau_fp must be positive"));
        }
        if !self.tau_a.is_finite() && self.tau_a < 0.0 {
            return Err(Error::config("tau_a must not be -inf"));
        }
        if !(0.0..=1.0).contains(&self.training_skew) {
            return Err(Error::config("training_skew must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.a_out_degradation) {
            return Err(Error::config("a_out_degradation must be in [0, 1]"));
        }
        if self.support_rule.is_empty() {
            return Err(Error::config("support_rule must have at least one step"));
        }
        if self.support_rule[0].min_window > 1 {
            return Err(Error::config("support_rule must cover window size 1"));
        }
        for pair in self.support_rule.windows(2) {
            if pair[1].min_window <= pair[0].min_window {
                return Err(Error::config("support_rule steps must have increasing min_window"));
            }
        }
        if self.support_rule.iter().any(|s| s.support == 0) {
            return Err(Error::config("support values must be at least 1"));
        }
        if let Variant::FixedWindow { w } = self.variant {
            if w == 0 || w > self.max_window {
                return Err(Error::config("fixed window size must be in [1, max_window]"));
            }
        }
        Ok(())
    }
}

/// Labels whose frequency in `window` reaches `support`.
pub fn dom_classes(window: &[u32], support: usize) -> BTreeSet<u32> {
    debug_assert!(support >= 1);
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &l in window {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter_map(|(l, c)| (c >= support).then_some(l))
        .collect()
}

/// The configured support rule evaluated at window length `w`.
pub fn support_threshold(config: &WegConfig, w: usize) -> usize {
    config
        .support_rule
        .iter()
        .take_while(|s| s.min_window <= w)
        .last()
        .map(|s| s.support)
        .unwrap_or(1)
}

/// Controller phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WindowInit,
    TemplateSelection,
    Specialized,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::WindowInit => "window_init",
            Phase::TemplateSelection => "template_selection",
            Phase::Specialized => "specialized",
        }
    }
}

/// How retargeting latency is charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// `R_T` is charged once and `ceil(R_T / frame_interval)` items are
    /// routed to the oracle while the specialization "trains".
    Streaming,
    /// `R_T` is charged once; the cascade serves immediately.
    Batch,
}

/// The active cascade and its audit state.
#[derive(Clone, Debug)]
struct ActiveCascade {
    cascade: CascadedClassifier,
    /// Clean interpolated params frozen at entry; drive the accuracy
    /// estimate even when the ablation degrades the model itself.
    est_params: SpecializationParams,
    /// Expected non-cascade rate at entry; the simple-exit reference point.
    entry_skew: f64,
    /// Sliding evidence window: non-cascade indicators plus oracle-label
    /// membership from audits and retarget routing.
    evidence: VecDeque<bool>,
    evidence_ones: usize,
    evidence_cap: usize,
    /// Non-cascaded count `n_c` and audited mismatch count `n*`.
    n_c: u64,
    n_star: u64,
}

impl ActiveCascade {
    fn push_evidence(&mut self, hit: bool) {
        self.evidence.push_back(hit);
        self.evidence_ones += hit as usize;
        if self.evidence.len() > self.evidence_cap {
            if let Some(old) = self.evidence.pop_front() {
                self.evidence_ones -= old as usize;
            }
        }
    }

    fn skew_estimate(&self) -> f64 {
        if self.evidence.is_empty() {
            0.0
        } else {
            self.evidence_ones as f64 / self.evidence.len() as f64
        }
    }
}

/// Mutable controller state, owned by exactly one run.
#[derive(Clone, Debug)]
pub struct WegState {
    /// Epoch counter `j`.
    pub epoch: usize,
    phase: Phase,
    /// Oracle-label window `S_j`, capped at `max_window`.
    window: Vec<u32>,
    /// Window size `w` fixed when template selection begins.
    epoch_w: usize,
    /// Previous epoch's exploration window and its dominant set.
    prev_window: Vec<u32>,
    prev_dom: BTreeSet<u32>,
    /// Cascade serving the specialized phase; present iff the phase is
    /// `Specialized`.
    active: Option<ActiveCascade>,
    /// Cascade still "training" in streaming mode, with the number of items
    /// left to route to the oracle.
    pending: Option<(ActiveCascade, usize)>,
    // Cumulative run statistics.
    retargets: u64,
    exits: u64,
    dom_size_sum: f64,
    window_size_sum: f64,
    selections: u64,
}

impl WegState {
    pub fn new() -> Self {
        WegState {
            epoch: 1,
            phase: Phase::WindowInit,
            window: Vec::new(),
            epoch_w: 0,
            prev_window: Vec::new(),
            prev_dom: BTreeSet::new(),
            active: None,
            pending: None,
            retargets: 0,
            exits: 0,
            dom_size_sum: 0.0,
            window_size_sum: 0.0,
            selections: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of retargeting (specialization) events so far.
    pub fn retargets(&self) -> u64 {
        self.retargets
    }

    /// Number of exits from the specialized phase so far.
    pub fn exits(&self) -> u64 {
        self.exits
    }

    /// Mean dominant-set size over specializations (0 when none).
    pub fn mean_dom_size(&self) -> f64 {
        if self.retargets == 0 {
            0.0
        } else {
            self.dom_size_sum / self.retargets as f64
        }
    }

    /// Mean window size at template-selection entry (0 when never reached).
    pub fn mean_window_size(&self) -> f64 {
        if self.selections == 0 {
            0.0
        } else {
            self.window_size_sum / self.selections as f64
        }
    }
}

impl Default for WegState {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of one controller step.
#[derive(Clone, Copy, Debug)]
pub struct StepResult {
    pub label: ClassLabel,
    pub cost_ms: f64,
    /// Phase that handled the item. Retarget-routed items report
    /// `TemplateSelection`: the oracle serves them while training runs.
    pub phase: Phase,
    pub cascaded: bool,
    /// True when the ε audit ran the oracle alongside the cascade.
    pub explored: bool,
    /// True on the step that carries the retargeting charge.
    pub retargeted: bool,
}

/// The controller: immutable configuration plus profiles. Owns no run state;
/// drive it by passing a [`WegState`] and the run's RNG to [`step`].
///
/// [`step`]: WegController::step
#[derive(Clone, Debug)]
pub struct WegController {
    config: WegConfig,
    oracle: OracleProfile,
    templates: Vec<CompactProfile>,
    mode: RunMode,
    /// Seconds between items; converts retargeting seconds into routed items.
    frame_interval: f64,
    retarget_charge_ms: Vec<f64>,
}

impl WegController {
    pub fn new(
        config: WegConfig,
        oracle: OracleProfile,
        templates: Vec<CompactProfile>,
        mode: RunMode,
        frame_interval: f64,
    ) -> Result<Self> {
        config.validate()?;
        oracle.validate()?;
        if templates.is_empty() {
            return Err(Error::config("the controller needs at least one template"));
        }
        if !(frame_interval > 0.0) {
            return Err(Error::config("frame_interval must be positive"));
        }
        for t in &templates {
            t.validate()?;
            if t.run_cost_ms >= oracle.cost_ms {
                return Err(Error::config(format!(
                    "template {}: run cost {} ms is not below oracle cost {} ms",
                    t.name, t.run_cost_ms, oracle.cost_ms
                )));
            }
        }
        let retarget_charge_ms = templates.iter().map(|t| t.retarget_cost_s * 1000.0).collect();
        Ok(WegController {
            config,
            oracle,
            templates,
            mode,
            frame_interval,
            retarget_charge_ms,
        })
    }

    pub fn config(&self) -> &WegConfig {
        &self.config
    }

    pub fn oracle(&self) -> &OracleProfile {
        &self.oracle
    }

    fn init_len(&self) -> usize {
        match self.config.variant {
            Variant::FixedWindow { w } => w,
            _ => self.config.w_min,
        }
    }

    /// Process one stream item.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut WegState,
        true_label: ClassLabel,
        rng: &mut R,
    ) -> StepResult {
        match state.phase {
            Phase::WindowInit => self.window_init_step(state, true_label, rng),
            Phase::TemplateSelection => self.template_selection_step(state, true_label, rng),
            Phase::Specialized => self.specialized_phase_step(state, true_label, rng),
        }
    }

    fn window_init_step<R: Rng + ?Sized>(
        &self,
        state: &mut WegState,
        true_label: ClassLabel,
        rng: &mut R,
    ) -> StepResult {
        let label = oracle_classify(&self.oracle, true_label, rng);
        state.window.push(label.0);
        if state.window.len() >= self.init_len() {
            if !matches!(self.config.variant, Variant::FixedWindow { .. })
                && !state.prev_window.is_empty()
            {
                let support = support_threshold(&self.config, state.window.len());
                let dom_new = dom_classes(&state.window, support);
                let mismatch = state.prev_dom.symmetric_difference(&dom_new).count();
                if mismatch <= self.config.tau_r {
                    // Same epoch continues: prepend the previous window.
                    let mut merged = std::mem::take(&mut state.prev_window);
                    merged.append(&mut state.window);
                    state.window = merged;
                    if state.window.len() > self.config.max_window {
                        let excess = state.window.len() - self.config.max_window;
                        state.window.drain(..excess);
                    }
                }
            }
            state.epoch_w = state.window.len();
            state.window_size_sum += state.epoch_w as f64;
            state.selections += 1;
            state.phase = Phase::TemplateSelection;
        }
        StepResult {
            label,
            cost_ms: self.oracle.cost_ms,
            phase: Phase::WindowInit,
            cascaded: false,
            explored: false,
            retargeted: false,
        }
    }

    /// Evaluate the accuracy test over all templates at the current window.
    /// Returns the index of the cheapest passing template.
    fn select_template(&self, dom: &BTreeSet<u32>, p_star: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, template) in self.templates.iter().enumerate() {
            let params = interpolate_profile(&template.param_table, dom.len() as u32);
            let est = estimate_accuracy(p_star, &params, self.oracle.accuracy);
            if est >= self.oracle.accuracy + self.config.tau_a {
                // Expected-cost tie-break: R_h + (1 - p_stay) R* with
                // p_stay = p* (1 - e_in_out).
                let p_stay = p_star * (1.0 - params.e_in_out);
                let expected_cost = template.run_cost_ms + (1.0 - p_stay) * self.oracle.cost_ms;
                if best.is_none_or(|(_, c)| expected_cost < c) {
                    best = Some((idx, expected_cost));
                }
            }
        }
        best.map(|(idx, _)| idx)
    }

    fn template_selection_step<R: Rng + ?Sized>(
        &self,
        state: &mut WegState,
        true_label: ClassLabel,
        rng: &mut R,
    ) -> StepResult {
        // Retarget routing in progress: the oracle serves while training.
        if let Some((ac, remaining)) = state.pending.as_mut() {
            let label = oracle_classify(&self.oracle, true_label, rng);
            let in_dom = ac.cascade.specialized.contains(label);
            ac.push_evidence(in_dom);
            *remaining -= 1;
            if *remaining == 0 {
                let (ac, _) = state.pending.take().expect("checked above");
                state.active = Some(ac);
                state.phase = Phase::Specialized;
            }
            return StepResult {
                label,
                cost_ms: self.oracle.cost_ms,
                phase: Phase::TemplateSelection,
                cascaded: false,
                explored: false,
                retargeted: false,
            };
        }

        let w = state.epoch_w.min(state.window.len());
        let tail = &state.window[state.window.len() - w..];
        let support = support_threshold(&self.config, w);
        let dom = dom_classes(tail, support);

        if !dom.is_empty() {
            let in_dom = tail.iter().filter(|l| dom.contains(l)).count();
            let p_star = in_dom as f64 / w as f64;
            if let Some(idx) = self.select_template(&dom, p_star) {
                return self.begin_specialization(state, idx, &dom, p_star, true_label, rng);
            }
        }

        // Keep exploring with the oracle.
        let label = oracle_classify(&self.oracle, true_label, rng);
        state.window.push(label.0);
        if state.window.len() > self.config.max_window {
            state.window.remove(0);
        }
        StepResult {
            label,
            cost_ms: self.oracle.cost_ms,
            phase: Phase::TemplateSelection,
            cascaded: false,
            explored: false,
            retargeted: false,
        }
    }

    fn begin_specialization<R: Rng + ?Sized>(
        &self,
        state: &mut WegState,
        template_idx: usize,
        dom: &BTreeSet<u32>,
        p_star: f64,
        true_label: ClassLabel,
        rng: &mut R,
    ) -> StepResult {
        let template = &self.templates[template_idx];
        let dominant: Vec<u32> = dom.iter().copied().collect();
        let est_params = interpolate_profile(&template.param_table, dominant.len() as u32);

        let training_skew = match self.config.variant {
            Variant::VariableTrainingSkew => p_star,
            _ => self.config.training_skew,
        };
        let mut model = specialize(template, &dominant, training_skew)
            .expect("dominant set is non-empty and duplicate-free");
        if matches!(self.config.variant, Variant::VariableTrainingSkew) {
            model.params.a_out *= self.config.a_out_degradation;
        }
        let cascade = CascadedClassifier::new(model, self.oracle)
            .expect("template cost validated at construction");

        let evidence_cap = self.config.w_min.max(state.epoch_w);
        // Warm-start the evidence window with the in-dominant indicators of
        // the freshest oracle labels; their mean is the entry skew.
        let seed_from = state.window.len().saturating_sub(evidence_cap);
        let mut evidence = VecDeque::with_capacity(evidence_cap + 1);
        let mut evidence_ones = 0usize;
        for &l in &state.window[seed_from..] {
            let hit = dom.contains(&l);
            evidence.push_back(hit);
            evidence_ones += hit as usize;
        }
        let entry_skew =
            p_star * (1.0 - est_params.e_in_out) + (1.0 - p_star) * (1.0 - est_params.a_out);

        let cascade = ActiveCascade {
            cascade,
            est_params,
            entry_skew,
            evidence,
            evidence_ones,
            evidence_cap,
            n_c: 0,
            n_star: 0,
        };
        state.retargets += 1;
        state.dom_size_sum += dominant.len() as f64;

        let retarget_ms = self.retarget_charge_ms[template_idx];
        let routed_items = match self.mode {
            RunMode::Streaming => self.routing_length(template.retarget_cost_s),
            RunMode::Batch => 0,
        };
        if routed_items > 0 {
            // First routed item carries the retarget charge.
            state.pending = Some((cascade, routed_items));
            let label = oracle_classify(&self.oracle, true_label, rng);
            let (ac, remaining) = state.pending.as_mut().expect("just set");
            let in_dom = ac.cascade.specialized.contains(label);
            ac.push_evidence(in_dom);
            *remaining -= 1;
            if *remaining == 0 {
                let (ac, _) = state.pending.take().expect("just set");
                state.active = Some(ac);
                state.phase = Phase::Specialized;
            }
            StepResult {
                label,
                cost_ms: self.oracle.cost_ms + retarget_ms,
                phase: Phase::TemplateSelection,
                cascaded: false,
                explored: false,
                retargeted: true,
            }
        } else {
            state.active = Some(cascade);
            state.phase = Phase::Specialized;
            let mut result = self.specialized_phase_step(state, true_label, rng);
            result.cost_ms += retarget_ms;
            result.retargeted = true;
            result
        }
    }

    /// Items to route to the oracle while a retargeting "trains":
    /// ceil(R_T / frame_interval), robust to division round-off.
    fn routing_length(&self, retarget_cost_s: f64) -> usize {
        let ratio = retarget_cost_s / self.frame_interval;
        let rounded = ratio.round();
        if (ratio - rounded).abs() < 1e-9 {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn specialized_phase_step<R: Rng + ?Sized>(
        &self,
        state: &mut WegState,
        true_label: ClassLabel,
        rng: &mut R,
    ) -> StepResult {
        let ac = state.active.as_mut().expect("specialized phase has an active cascade");
        let outcome = cascaded_classify(&ac.cascade, true_label, rng);
        ac.push_evidence(!outcome.cascaded);

        let mut explored = false;
        if !outcome.cascaded {
            ac.n_c += 1;
            // The audit draw happens only on non-cascaded results.
            if rng.gen::<f64>() < self.config.epsilon {
                explored = true;
                let oracle_label = oracle_classify(&self.oracle, true_label, rng);
                if oracle_label != outcome.label {
                    ac.n_star += 1;
                }
                ac.push_evidence(ac.cascade.specialized.contains(oracle_label));
            }
        }

        let p_hat = ac.skew_estimate();
        let exit = match self.config.variant {
            Variant::SimpleExit => p_hat < ac.entry_skew,
            _ => {
                let est = estimate_accuracy(p_hat, &ac.est_params, self.oracle.accuracy);
                let accuracy_low = est < self.oracle.accuracy + self.config.tau_a;
                let fp_high = ac.n_c > 0
                    && ac.n_star as f64 / (ac.n_c as f64 * self.config.epsilon) > self.config.tau_fp;
                accuracy_low || fp_high
            }
        };

        let cost_ms = outcome.cost_ms + if explored { self.oracle.cost_ms } else { 0.0 };
        let result = StepResult {
            label: outcome.label,
            cost_ms,
            phase: Phase::Specialized,
            cascaded: outcome.cascaded,
            explored,
            retargeted: false,
        };

        if exit {
            let dominant = std::mem::take(&mut state.active)
                .expect("checked above")
                .cascade
                .specialized
                .dominant_set;
            state.prev_dom = dominant.into_iter().collect();
            state.prev_window = std::mem::take(&mut state.window);
            state.epoch += 1;
            state.exits += 1;
            state.epoch_w = 0;
            state.phase = Phase::WindowInit;
        }
        result
    }
}

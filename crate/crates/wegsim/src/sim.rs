//! Simulation driver: drives a policy over a stream, keeps a per-step log,
//! and reduces it to metrics with regret accounting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Policy, RunConfig, StreamSource};
use crate::error::{Error, Result};
use crate::models::{interpolate_profile, oracle_classify, CompactProfile, OracleProfile};
use crate::rng;
use crate::stream::{generate_stream, load_trace, ResolvedSegment, StreamItem};
use crate::weg::{Phase, WegController, WegState};

/// One per-step log record; serialized as one JSON object per line.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepLog {
    pub t: usize,
    pub true_label: u32,
    pub predicted: u32,
    pub correct: bool,
    pub phase: Phase,
    pub cascaded: bool,
    pub explored: bool,
    pub retargeted: bool,
    pub cost_ms: f64,
}

/// Metrics of one repetition.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub policy: String,
    pub seed: u64,
    pub repetition: usize,
    pub items: usize,
    pub accuracy: f64,
    pub mean_cost_ms: f64,
    pub oracle_only_cost_ms: f64,
    pub speedup: f64,
    /// Fraction of items handled in the specialized phase.
    pub special_rate: f64,
    /// Among specialized-phase items, the fraction that cascaded.
    pub cascade_rate: f64,
    pub retargets: u64,
    pub mean_dom_size: f64,
    pub mean_window_size: f64,
    /// Unavailable for trace replays (segment truth unknown).
    pub regret_ms: Option<f64>,
}

/// Everything a repetition produced.
#[derive(Clone, Debug)]
pub struct RepetitionResult {
    pub metrics: RunMetrics,
    pub log: Vec<StepLog>,
}

/// The whole run: per-repetition results plus their mean.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub repetitions: Vec<RepetitionResult>,
}

impl RunReport {
    pub fn mean_accuracy(&self) -> f64 {
        mean(self.repetitions.iter().map(|r| r.metrics.accuracy))
    }

    pub fn mean_cost_ms(&self) -> f64 {
        mean(self.repetitions.iter().map(|r| r.metrics.mean_cost_ms))
    }

    pub fn mean_speedup(&self) -> f64 {
        mean(self.repetitions.iter().map(|r| r.metrics.speedup))
    }

    pub fn mean_retargets(&self) -> f64 {
        mean(self.repetitions.iter().map(|r| r.metrics.retargets as f64))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Expected per-item cost of `template` retargeted to a segment with
/// `n` dominant classes at skew `p`: `R_h + P(cascade) * R*` with
/// `P(cascade) = p*e_in_out + (1-p)*a_out` at the interpolated parameters.
pub fn expected_cascade_cost(template: &CompactProfile, oracle: &OracleProfile, n: u32, p: f64) -> f64 {
    let params = interpolate_profile(&template.param_table, n);
    let p_cascade = p * params.e_in_out + (1.0 - p) * params.a_out;
    template.run_cost_ms + p_cascade * oracle.cost_ms
}

/// Per-epoch comparator: the cheapest of the oracle and every template
/// perfectly specialized to the epoch's dominant set, from closed forms.
/// Uniform epochs admit no specialization, so the oracle is the comparator.
pub fn comparator_cost_per_item(
    segment: &ResolvedSegment,
    oracle: &OracleProfile,
    templates: &[CompactProfile],
) -> f64 {
    let mut best = oracle.cost_ms;
    if segment.n_dominant > 0 {
        for t in templates {
            let c = expected_cascade_cost(t, oracle, segment.n_dominant, segment.skew);
            if c < best {
                best = c;
            }
        }
    }
    best
}

/// Total actual cost minus the summed per-epoch comparator cost.
/// Retargeting charges and audit extras count against the actual cost only.
pub fn compute_regret(
    log: &[StepLog],
    segments: &[ResolvedSegment],
    oracle: &OracleProfile,
    templates: &[CompactProfile],
) -> f64 {
    let actual: f64 = log.iter().map(|s| s.cost_ms).sum();
    let comparator: f64 = segments
        .iter()
        .map(|seg| seg.length as f64 * comparator_cost_per_item(seg, oracle, templates))
        .sum();
    actual - comparator
}

struct PreparedStream {
    items: Vec<StreamItem>,
    segments: Option<Vec<ResolvedSegment>>,
}

fn prepare_stream(config: &RunConfig, rep: usize, sweep_index: Option<u64>) -> Result<PreparedStream> {
    match &config.stream {
        StreamSource::Synthetic(_) => {
            let mut path = vec![rng::BRANCH_STREAM, rep as u64];
            if let Some(s) = sweep_index {
                path.push(s);
            }
            let derived_seed = rng::derive_seed(config.run.seed, &path);
            let spec = config
                .stream
                .synthetic_spec(derived_seed)
                .expect("synthetic source");
            let generated = generate_stream(&spec)?;
            Ok(PreparedStream { items: generated.items, segments: Some(generated.segments) })
        }
        StreamSource::Trace(t) => {
            let oracle = config.oracle.resolve()?;
            let trace = load_trace(&t.trace)?;
            if let Some(n) = trace.num_classes {
                if n != oracle.num_classes {
                    return Err(Error::config(format!(
                        "trace declares N={n} but the oracle has {} classes",
                        oracle.num_classes
                    )));
                }
            }
            if let Some(bad) = trace.items.iter().find(|it| it.true_label.0 >= oracle.num_classes) {
                return Err(Error::config(format!(
                    "trace label {} at index {} out of range [0, {})",
                    bad.true_label.0, bad.index, oracle.num_classes
                )));
            }
            Ok(PreparedStream { items: trace.items, segments: None })
        }
    }
}

/// Run one repetition and return its log plus controller statistics.
fn run_repetition(
    config: &RunConfig,
    oracle: &OracleProfile,
    templates: &[CompactProfile],
    prepared: &PreparedStream,
    rep: usize,
    sweep_index: Option<u64>,
) -> Result<(Vec<StepLog>, WegState)> {
    let mut path = vec![rng::BRANCH_POLICY, rep as u64];
    if let Some(s) = sweep_index {
        path.push(s);
    }
    let mut rng = rng::derive_rng(config.run.seed, &path);

    let mut log = Vec::with_capacity(prepared.items.len());
    let mut state = WegState::new();

    match config.run.policy {
        Policy::OracleOnly => {
            for item in &prepared.items {
                let label = oracle_classify(oracle, item.true_label, &mut rng);
                log.push(StepLog {
                    t: item.index,
                    true_label: item.true_label.0,
                    predicted: label.0,
                    correct: label == item.true_label,
                    phase: Phase::WindowInit,
                    cascaded: false,
                    explored: false,
                    retargeted: false,
                    cost_ms: oracle.cost_ms,
                });
            }
        }
        Policy::Weg => {
            let controller = WegController::new(
                config.weg_config(),
                *oracle,
                templates.to_vec(),
                config.run.mode,
                config.stream.frame_interval(),
            )?;
            for item in &prepared.items {
                let r = controller.step(&mut state, item.true_label, &mut rng);
                log.push(StepLog {
                    t: item.index,
                    true_label: item.true_label.0,
                    predicted: r.label.0,
                    correct: r.label == item.true_label,
                    phase: r.phase,
                    cascaded: r.cascaded,
                    explored: r.explored,
                    retargeted: r.retargeted,
                    cost_ms: r.cost_ms,
                });
            }
        }
    }

    Ok((log, state))
}

/// Name under which the effective policy appears in metrics rows.
pub fn policy_label(config: &RunConfig) -> String {
    match config.run.policy {
        Policy::OracleOnly => "oracle_only".to_string(),
        Policy::Weg => config.weg_config().variant.label(),
    }
}

/// Drive the configured policy over the stream, once per repetition.
/// Deterministic for a fixed config (including seed).
pub fn run_simulation(config: &RunConfig) -> Result<RunReport> {
    run_simulation_indexed(config, None)
}

/// As [`run_simulation`], with a sweep index folded into every repetition's
/// randomness derivation.
pub fn run_simulation_indexed(config: &RunConfig, sweep_index: Option<u64>) -> Result<RunReport> {
    config.validate()?;
    let oracle = config.oracle.resolve()?;
    let templates: Vec<CompactProfile> =
        config.templates.iter().map(|t| t.resolve()).collect::<Result<_>>()?;
    let run_id = config.run_id();
    let policy = policy_label(config);

    let mut repetitions = Vec::with_capacity(config.run.repetitions);
    for rep in 0..config.run.repetitions {
        let prepared = prepare_stream(config, rep, sweep_index)?;
        let (log, state) = run_repetition(config, &oracle, &templates, &prepared, rep, sweep_index)?;

        let items = log.len();
        let correct = log.iter().filter(|s| s.correct).count();
        let total_cost: f64 = log.iter().map(|s| s.cost_ms).sum();
        let special_items = log.iter().filter(|s| s.phase == Phase::Specialized).count();
        let special_cascaded =
            log.iter().filter(|s| s.phase == Phase::Specialized && s.cascaded).count();

        let accuracy = if items == 0 { 0.0 } else { correct as f64 / items as f64 };
        let mean_cost_ms = if items == 0 { 0.0 } else { total_cost / items as f64 };
        let speedup = if mean_cost_ms > 0.0 { oracle.cost_ms / mean_cost_ms } else { 1.0 };
        let regret_ms = prepared
            .segments
            .as_ref()
            .map(|segments| compute_regret(&log, segments, &oracle, &templates));

        let metrics = RunMetrics {
            run_id: run_id.clone(),
            policy: policy.clone(),
            seed: config.run.seed,
            repetition: rep,
            items,
            accuracy,
            mean_cost_ms,
            oracle_only_cost_ms: oracle.cost_ms,
            speedup,
            special_rate: if items == 0 { 0.0 } else { special_items as f64 / items as f64 },
            cascade_rate: if special_items == 0 {
                0.0
            } else {
                special_cascaded as f64 / special_items as f64
            },
            retargets: state.retargets(),
            mean_dom_size: state.mean_dom_size(),
            mean_window_size: state.mean_window_size(),
            regret_ms,
        };
        repetitions.push(RepetitionResult { metrics, log });
    }
    Ok(RunReport { repetitions })
}

/// CSV header for metrics rows, in the documented column order.
pub const METRICS_CSV_HEADER: &str = "run_id,policy,seed,repetition,items,accuracy,mean_cost_ms,oracle_only_cost_ms,speedup,special_rate,cascade_rate,retargets,mean_dom_size,mean_window_size,regret_ms";

/// One metrics row in the documented column order. Floats use the shortest
/// round-trip form so recomputation from logs can compare exactly.
pub fn metrics_csv_row(m: &RunMetrics) -> String {
    let regret = m.regret_ms.map(|r| r.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        m.run_id,
        m.policy,
        m.seed,
        m.repetition,
        m.items,
        m.accuracy,
        m.mean_cost_ms,
        m.oracle_only_cost_ms,
        m.speedup,
        m.special_rate,
        m.cascade_rate,
        m.retargets,
        m.mean_dom_size,
        m.mean_window_size,
        regret
    )
}

/// Write metrics rows (with header) as CSV.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[&RunMetrics]) -> Result<()> {
    writeln!(w, "{METRICS_CSV_HEADER}")?;
    for m in rows {
        writeln!(w, "{}", metrics_csv_row(m))?;
    }
    Ok(())
}

/// Write the per-step logs of all repetitions, one JSON object per line.
/// Repetitions concatenate; `t` restarts with each repetition.
pub fn write_step_log<W: Write>(mut w: W, report: &RunReport) -> Result<()> {
    for rep in &report.repetitions {
        for step in &rep.log {
            let line = serde_json::to_string(step).expect("step log serializes");
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

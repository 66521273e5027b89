//! Piecewise-stationary class-skewed label streams.
//!
//! A stream is a sequence of integer labels drawn from consecutive stationary
//! segments. Each segment has `n_dominant` dominant classes carrying
//! probability mass `skew`; the remaining mass is uniform over the other
//! classes. Streams are generated deterministically from a 64-bit seed, or
//! loaded from a recorded trace file.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A class identity in `[0, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub u32);

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One stationary segment of the stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// Number of dominant classes; 0 means the segment is uniform.
    pub n_dominant: u32,
    /// Probability mass of the dominant set. Ignored when `n_dominant` is 0.
    #[serde(default)]
    pub skew: f64,
    /// Number of items the segment produces.
    pub length: usize,
    /// Explicit dominant labels. When absent, `n_dominant` labels are sampled
    /// without replacement from the stream seed, independently per segment.
    #[serde(default)]
    pub dominant_set: Option<Vec<u32>>,
}

/// Default item spacing in seconds.
pub const DEFAULT_FRAME_INTERVAL: f64 = 1.0 / 6.0;

fn default_frame_interval() -> f64 {
    DEFAULT_FRAME_INTERVAL
}

/// Generator description for a synthetic stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    /// Size `N` of the class universe.
    pub num_classes: u32,
    /// Consecutive stationary segments, in order.
    pub segments: Vec<SegmentSpec>,
    /// Stream seed; fully determines the generated sequence.
    pub seed: u64,
    /// Seconds between consecutive items. Metadata used by the harness to
    /// convert retargeting seconds into item counts; generation itself is
    /// index-based.
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
}

/// One stream element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamItem {
    /// Sequence position.
    pub index: usize,
    /// Ground-truth label.
    pub true_label: ClassLabel,
    /// Index of the generating segment (0 for trace replays).
    pub segment_id: usize,
}

/// A segment with its dominant set resolved, as actually used for sampling.
#[derive(Clone, Debug)]
pub struct ResolvedSegment {
    pub n_dominant: u32,
    pub skew: f64,
    pub length: usize,
    /// Sorted dominant labels; empty when the segment is uniform.
    pub dominant_set: Vec<u32>,
}

/// A generated stream plus the resolved per-segment ground truth.
#[derive(Clone, Debug)]
pub struct GeneratedStream {
    pub items: Vec<StreamItem>,
    pub segments: Vec<ResolvedSegment>,
}

/// Check a stream spec without generating anything.
pub fn validate_spec(spec: &StreamSpec) -> Result<()> {
    if spec.num_classes < 2 {
        return Err(Error::config("stream num_classes must be at least 2"));
    }
    if spec.segments.is_empty() {
        return Err(Error::config("stream needs at least one segment"));
    }
    if !(spec.frame_interval > 0.0) {
        return Err(Error::config("frame_interval must be positive"));
    }
    for (i, seg) in spec.segments.iter().enumerate() {
        if seg.length == 0 {
            return Err(Error::config(format!("segment {i}: length must be positive")));
        }
        if seg.n_dominant > spec.num_classes {
            return Err(Error::config(format!(
                "segment {i}: n_dominant {} exceeds num_classes {}",
                seg.n_dominant, spec.num_classes
            )));
        }
        if seg.n_dominant > 0 && !(0.0..=1.0).contains(&seg.skew) {
            return Err(Error::config(format!("segment {i}: skew must be in [0, 1]")));
        }
        if let Some(set) = &seg.dominant_set {
            if set.len() != seg.n_dominant as usize {
                return Err(Error::config(format!(
                    "segment {i}: dominant_set has {} labels, expected n_dominant = {}",
                    set.len(),
                    seg.n_dominant
                )));
            }
            let distinct: BTreeSet<u32> = set.iter().copied().collect();
            if distinct.len() != set.len() {
                return Err(Error::config(format!("segment {i}: dominant_set has duplicates")));
            }
            if set.iter().any(|&l| l >= spec.num_classes) {
                return Err(Error::config(format!(
                    "segment {i}: dominant_set label out of range [0, {})",
                    spec.num_classes
                )));
            }
        }
    }
    Ok(())
}

/// Draw the k-th label outside `sorted_dominant` (order statistic over the
/// complement of the dominant set).
fn complement_label(k: u32, sorted_dominant: &[u32]) -> u32 {
    let mut label = k;
    for &d in sorted_dominant {
        if label >= d {
            label += 1;
        } else {
            break;
        }
    }
    label
}

/// Generate the full stream for `spec`. Deterministic for a fixed spec
/// (including seed): per segment, each item's label comes from the dominant
/// set with probability `skew` (uniform within it) and is otherwise uniform
/// over the non-dominant labels.
pub fn generate_stream(spec: &StreamSpec) -> Result<GeneratedStream> {
    validate_spec(spec)?;
    let mut rng = rng::derive_rng(spec.seed, &[rng::BRANCH_STREAM]);
    let n_classes = spec.num_classes;
    let mut items = Vec::with_capacity(spec.segments.iter().map(|s| s.length).sum());
    let mut segments = Vec::with_capacity(spec.segments.len());
    let mut index = 0usize;

    for (segment_id, seg) in spec.segments.iter().enumerate() {
        let mut dominant: Vec<u32> = match &seg.dominant_set {
            Some(set) => set.clone(),
            None => sample(&mut rng, n_classes as usize, seg.n_dominant as usize)
                .into_iter()
                .map(|i| i as u32)
                .collect(),
        };
        dominant.sort_unstable();

        let n = dominant.len() as u32;
        for _ in 0..seg.length {
            let label = if n > 0 && rng.gen::<f64>() < seg.skew {
                dominant[rng.gen_range(0..n as usize)]
            } else if n == n_classes {
                // Dominant set covers the whole universe; skew is moot.
                dominant[rng.gen_range(0..n as usize)]
            } else {
                let k = rng.gen_range(0..n_classes - n);
                complement_label(k, &dominant)
            };
            items.push(StreamItem {
                index,
                true_label: ClassLabel(label),
                segment_id,
            });
            index += 1;
        }

        segments.push(ResolvedSegment {
            n_dominant: n,
            skew: if n > 0 { seg.skew } else { 0.0 },
            length: seg.length,
            dominant_set: dominant,
        });
    }

    Ok(GeneratedStream { items, segments })
}

/// A trace loaded from disk.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Class universe size declared by a `#N=<int>` header, if any.
    pub num_classes: Option<u32>,
    pub items: Vec<StreamItem>,
}

/// Load a recorded label trace.
///
/// Format: one `index,label` pair per line (decimal), `#`-prefixed comment
/// lines, and an optional `#N=<int>` header declaring the class universe.
/// Labels are validated against the declared `N` when present. All items get
/// `segment_id = 0` (segment boundaries are unknown in real traces).
pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = std::fs::File::open(path)?;
    parse_trace(BufReader::new(file))
}

/// Parse trace text from any reader; see [`load_trace`] for the format.
pub fn parse_trace<R: Read>(reader: R) -> Result<Trace> {
    let mut num_classes: Option<u32> = None;
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line_number = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(n) = rest.strip_prefix("N=") {
                let n: u32 = n.trim().parse().map_err(|_| Error::Trace {
                    line: line_number,
                    message: format!("invalid N declaration: {rest:?}"),
                })?;
                num_classes = Some(n);
            }
            continue;
        }
        let (idx_str, label_str) = trimmed.split_once(',').ok_or_else(|| Error::Trace {
            line: line_number,
            message: format!("expected `index,label`, got {trimmed:?}"),
        })?;
        let index: usize = idx_str.trim().parse().map_err(|_| Error::Trace {
            line: line_number,
            message: format!("invalid index {:?}", idx_str.trim()),
        })?;
        let label: u32 = label_str.trim().parse().map_err(|_| Error::Trace {
            line: line_number,
            message: format!("invalid label {:?}", label_str.trim()),
        })?;
        if let Some(n) = num_classes {
            if label >= n {
                return Err(Error::Trace {
                    line: line_number,
                    message: format!("label {label} out of range [0, {n})"),
                });
            }
        }
        items.push(StreamItem {
            index,
            true_label: ClassLabel(label),
            segment_id: 0,
        });
    }
    Ok(Trace { num_classes, items })
}

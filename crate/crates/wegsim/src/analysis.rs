//! Closed-form probabilities for dominant-class detection, and trace skew
//! measurement.
//!
//! Under a stationary regime with `n` dominant classes at skew `p`, classified
//! by an oracle of accuracy `a*` whose errors are uniform over the other
//! `N - 1` classes, each window slot is an oracle output. The per-slot
//! probability of one fixed class is closed-form, so the count of that class
//! in a `w`-slot window is binomial and the probability of clearing a minimum
//! support `c` is a binomial tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One detection regime: distribution, oracle, and window settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub num_classes: u32,
    pub oracle_accuracy: f64,
    /// Number of dominant classes; 0 means a uniform (unskewed) regime.
    pub n_dominant: u32,
    /// Skew of the dominant set; `None` for uniform regimes.
    pub skew: Option<f64>,
    pub window: u32,
    pub support: u32,
}

impl RegimeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::domain("regime needs at least 2 classes"));
        }
        if self.n_dominant > self.num_classes {
            return Err(Error::domain("n_dominant exceeds num_classes"));
        }
        if !(self.oracle_accuracy >= 0.0 && self.oracle_accuracy <= 1.0) {
            return Err(Error::domain("oracle_accuracy must be in [0, 1]"));
        }
        if self.support == 0 || self.window < self.support {
            return Err(Error::domain("need window >= support >= 1"));
        }
        if self.n_dominant > 0 {
            match self.skew {
                Some(p) if (0.0..=1.0).contains(&p) => {}
                _ => return Err(Error::domain("skewed regime needs skew in [0, 1]")),
            }
        }
        Ok(())
    }
}

/// Probability that the oracle outputs one fixed dominant class on a single
/// input:
///
/// ```text
/// (1/n) * (p*a* + p*(1-a*)*(n-1)/(N-1) + (1-p)*(1-a*)*n/(N-1))
/// ```
pub fn prob_dominant_class(num_classes: u32, a_star: f64, n_dominant: u32, skew: f64) -> Result<f64> {
    if n_dominant == 0 {
        return Err(Error::domain("prob_dominant_class undefined for n = 0"));
    }
    if num_classes < 2 || n_dominant > num_classes {
        return Err(Error::domain("need 1 <= n <= N and N >= 2"));
    }
    let n = n_dominant as f64;
    let big_n = num_classes as f64;
    let p = skew;
    let miss = 1.0 - a_star;
    Ok((p * a_star + p * miss * (n - 1.0) / (big_n - 1.0) + (1.0 - p) * miss * n / (big_n - 1.0)) / n)
}

/// Probability that the oracle outputs one fixed non-dominant class on a
/// single input:
///
/// ```text
/// (1/(N-n)) * ((1-p)*a* + (1-p)*(1-a*)*(N-n-1)/(N-1) + p*(1-a*)*(N-n)/(N-1))
/// ```
///
/// For `n = 0` the skew is meaningless and the value reduces to `1/N`.
pub fn prob_nondominant_class(num_classes: u32, a_star: f64, n_dominant: u32, skew: f64) -> Result<f64> {
    if n_dominant >= num_classes {
        return Err(Error::domain("prob_nondominant_class undefined for n = N"));
    }
    let n = n_dominant as f64;
    let big_n = num_classes as f64;
    let p = if n_dominant == 0 { 0.0 } else { skew };
    let miss = 1.0 - a_star;
    Ok(
        ((1.0 - p) * a_star
            + (1.0 - p) * miss * (big_n - n - 1.0) / (big_n - 1.0)
            + p * miss * (big_n - n) / (big_n - 1.0))
            / (big_n - n),
    )
}

/// P[Binomial(w, q) >= c], summed directly over the upper tail in log space.
///
/// Tiny tails (p_out around 1e-5) keep full relative precision because the
/// tail is accumulated term by term instead of subtracting a near-1 CDF.
pub fn detection_probability(q: f64, w: u32, c: u32) -> f64 {
    assert!((0.0..=1.0).contains(&q), "q must be a probability, got {q}");
    assert!(c <= w, "need c <= w");
    if c == 0 {
        return 1.0;
    }
    if q == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return 1.0;
    }
    // ln k! for k = 0..=w
    let mut ln_fact = Vec::with_capacity(w as usize + 1);
    ln_fact.push(0.0f64);
    for k in 1..=w as usize {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let wf = w as usize;
    let mut tail = 0.0f64;
    for i in c as usize..=wf {
        let ln_term =
            ln_fact[wf] - ln_fact[i] - ln_fact[wf - i] + i as f64 * ln_q + (wf - i) as f64 * ln_1mq;
        tail += ln_term.exp();
    }
    tail.min(1.0)
}

/// One row of the window-support table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupportRow {
    pub index: usize,
    pub regime: RegimeSpec,
    /// Probability a fixed dominant class clears the support; `None` for
    /// uniform regimes.
    pub p_in: Option<f64>,
    /// Probability a fixed non-dominant class clears the support.
    pub p_out: f64,
}

/// Evaluate `p_in`/`p_out` for each regime.
pub fn window_support_table(regimes: &[RegimeSpec]) -> Result<Vec<SupportRow>> {
    regimes
        .iter()
        .enumerate()
        .map(|(i, regime)| {
            regime.validate()?;
            let p_in = if regime.n_dominant > 0 {
                let q = prob_dominant_class(
                    regime.num_classes,
                    regime.oracle_accuracy,
                    regime.n_dominant,
                    regime.skew.unwrap_or(0.0),
                )?;
                Some(detection_probability(q, regime.window, regime.support))
            } else {
                None
            };
            let q_out = prob_nondominant_class(
                regime.num_classes,
                regime.oracle_accuracy,
                regime.n_dominant,
                regime.skew.unwrap_or(0.0),
            )?;
            let p_out = detection_probability(q_out, regime.window, regime.support);
            Ok(SupportRow { index: i + 1, regime: *regime, p_in, p_out })
        })
        .collect()
}

/// The built-in regime set covering the reference operating points.
pub fn builtin_regimes() -> Vec<RegimeSpec> {
    let r = |num_classes, oracle_accuracy, n_dominant, skew: Option<f64>, window, support| RegimeSpec {
        num_classes,
        oracle_accuracy,
        n_dominant,
        skew,
        window,
        support,
    };
    vec![
        r(1000, 0.68, 5, Some(0.9), 30, 2),
        r(1000, 0.68, 10, Some(0.9), 30, 2),
        r(1000, 0.68, 10, Some(0.9), 60, 2),
        r(1000, 0.68, 10, Some(0.7), 60, 2),
        r(1000, 0.68, 10, Some(0.7), 90, 2),
        r(205, 0.58, 10, Some(0.9), 90, 2),
        r(205, 0.58, 10, Some(0.9), 90, 3),
        r(205, 0.58, 0, None, 90, 3),
    ]
}

/// Result of a minimum-support recommendation.
#[derive(Clone, Copy, Debug)]
pub struct SupportRecommendation {
    pub support: u32,
    pub p_in: Option<f64>,
    pub p_out: f64,
    /// False when no support in `1..=w` meets the target (q_out = 1).
    pub attainable: bool,
}

/// Smallest support `c >= 1` whose false-detection probability is at most
/// `target_p_out`, with the resulting `p_in` alongside. When even `c = w`
/// cannot meet the target (only possible when the per-slot probability is 1),
/// returns `c = w` flagged unattainable.
pub fn recommend_support(
    num_classes: u32,
    a_star: f64,
    n_dominant: u32,
    skew: Option<f64>,
    window: u32,
    target_p_out: f64,
) -> Result<SupportRecommendation> {
    if !(target_p_out > 0.0 && target_p_out <= 1.0) {
        return Err(Error::domain("target_p_out must be in (0, 1]"));
    }
    let q_out = prob_nondominant_class(num_classes, a_star, n_dominant, skew.unwrap_or(0.0))?;
    let q_in = if n_dominant > 0 {
        Some(prob_dominant_class(num_classes, a_star, n_dominant, skew.unwrap_or(0.0))?)
    } else {
        None
    };
    for c in 1..=window {
        let p_out = detection_probability(q_out, window, c);
        if p_out <= target_p_out {
            return Ok(SupportRecommendation {
                support: c,
                p_in: q_in.map(|q| detection_probability(q, window, c)),
                p_out,
                attainable: true,
            });
        }
    }
    Ok(SupportRecommendation {
        support: window,
        p_in: q_in.map(|q| detection_probability(q, window, window)),
        p_out: detection_probability(q_out, window, window),
        attainable: false,
    })
}

/// One cumulative curve of the skew measurement: `fractions[i]` is the
/// fraction of segments where the `i + 1` most frequent labels cover more
/// than `skew_percent` of the segment.
#[derive(Clone, Debug, Serialize)]
pub struct SkewCurve {
    pub skew_percent: f64,
    pub fractions: Vec<f64>,
}

/// Partition `labels` into consecutive segments of `segment_length` (dropping
/// a trailing partial segment) and measure, per requested skew `s`, the
/// fraction of segments whose minimal top-frequency cover of more than `s`
/// percent uses at most `n` labels.
///
/// The minimal cover sorts label frequencies descending and accumulates
/// greedily, which is optimal for this objective. The comparison is strictly
/// greater than `s` percent.
pub fn skew_cdf(labels: &[u32], segment_length: usize, skews_percent: &[f64]) -> Result<Vec<SkewCurve>> {
    if labels.is_empty() {
        return Err(Error::domain("skew_cdf needs a non-empty trace"));
    }
    if segment_length == 0 {
        return Err(Error::domain("segment_length must be positive"));
    }
    let num_segments = labels.len() / segment_length;
    if num_segments == 0 {
        return Err(Error::domain(format!(
            "trace shorter than one segment ({} < {})",
            labels.len(),
            segment_length
        )));
    }

    // Per segment: label counts sorted descending.
    let mut per_segment_counts: Vec<Vec<usize>> = Vec::with_capacity(num_segments);
    for s in 0..num_segments {
        let seg = &labels[s * segment_length..(s + 1) * segment_length];
        let mut counts = std::collections::HashMap::new();
        for &l in seg {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let mut counts: Vec<usize> = counts.into_values().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        per_segment_counts.push(counts);
    }
    let max_distinct = per_segment_counts.iter().map(|c| c.len()).max().unwrap_or(1);

    let mut curves = Vec::with_capacity(skews_percent.len());
    for &s in skews_percent {
        if !(0.0..=100.0).contains(&s) {
            return Err(Error::domain(format!("skew percentage {s} outside [0, 100]")));
        }
        let threshold = s / 100.0 * segment_length as f64;
        // Minimal cover per segment; None when unreachable (s = 100).
        let covers: Vec<Option<usize>> = per_segment_counts
            .iter()
            .map(|counts| {
                let mut cum = 0usize;
                for (i, &c) in counts.iter().enumerate() {
                    cum += c;
                    if cum as f64 > threshold {
                        return Some(i + 1);
                    }
                }
                None
            })
            .collect();
        let fractions = (1..=max_distinct)
            .map(|n| {
                let hits = covers.iter().filter(|c| matches!(c, Some(k) if *k <= n)).count();
                hits as f64 / num_segments as f64
            })
            .collect();
        curves.push(SkewCurve { skew_percent: s, fractions });
    }
    Ok(curves)
}

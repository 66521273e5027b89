//! Cascaded classification: a specialized model chained with the oracle.
//!
//! The specialized model runs first. An in-dominant label is returned
//! directly at cost `R_h`; an "other" output falls through to the oracle,
//! whose answer is final, at cost `R_h + R*`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{
    oracle_classify, specialized_classify, OracleProfile, SpecializationParams, SpecializedModel,
    SpecializedOutput,
};
use crate::stream::ClassLabel;

/// A specialized model chained with the oracle.
#[derive(Clone, Debug)]
pub struct CascadedClassifier {
    pub specialized: SpecializedModel,
    pub oracle: OracleProfile,
}

impl CascadedClassifier {
    /// Checks the cost invariant: the specialized stage must be cheaper than
    /// the oracle, or cascading cannot pay off.
    pub fn new(specialized: SpecializedModel, oracle: OracleProfile) -> Result<Self> {
        if specialized.run_cost_ms >= oracle.cost_ms {
            return Err(Error::config(format!(
                "template {} run cost {} ms is not below oracle cost {} ms",
                specialized.template_name, specialized.run_cost_ms, oracle.cost_ms
            )));
        }
        Ok(CascadedClassifier { specialized, oracle })
    }
}

/// Result of one cascaded call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeOutcome {
    pub label: ClassLabel,
    /// True when the call fell through to the oracle.
    pub cascaded: bool,
    /// `R_h` when not cascaded, `R_h + R*` when cascaded.
    pub cost_ms: f64,
}

/// Run the cascade on one input.
pub fn cascaded_classify<R: Rng + ?Sized>(
    cc: &CascadedClassifier,
    true_label: ClassLabel,
    rng: &mut R,
) -> CascadeOutcome {
    match specialized_classify(&cc.specialized, true_label, rng) {
        SpecializedOutput::InContext(label) => CascadeOutcome {
            label,
            cascaded: false,
            cost_ms: cc.specialized.run_cost_ms,
        },
        SpecializedOutput::Other => CascadeOutcome {
            label: oracle_classify(&cc.oracle, true_label, rng),
            cascaded: true,
            cost_ms: cc.specialized.run_cost_ms + cc.oracle.cost_ms,
        },
    }
}

/// Closed-form accuracy of the cascade when a fraction `p` of inputs lies in
/// the dominant set:
///
/// ```text
/// a = p*a_in + p*e_in_out*a_star + (1 - p)*a_out*a_star
/// ```
///
/// The three terms are: in-dominant inputs the specialist labels correctly;
/// in-dominant inputs deferred to the oracle; out-of-dominant inputs deferred
/// to the oracle.
pub fn estimate_accuracy(p: f64, params: &SpecializationParams, a_star: f64) -> f64 {
    p * params.a_in + p * params.e_in_out * a_star + (1.0 - p) * params.a_out * a_star
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn perfect_cascade() -> CascadedClassifier {
        CascadedClassifier::new(
            SpecializedModel {
                template_name: "T".into(),
                run_cost_ms: 1.93,
                dominant_set: vec![0, 1, 2, 3, 4],
                params: SpecializationParams { a_in: 1.0, e_in_out: 0.0, a_out: 1.0 },
                training_skew: 0.5,
            },
            OracleProfile { accuracy: 1.0, cost_ms: 28.8, num_classes: 2622 },
        )
        .unwrap()
    }

    #[test]
    fn perfect_specialist_returns_early() {
        let cc = perfect_cascade();
        let mut rng = derive_rng(0, &[]);
        let out = cascaded_classify(&cc, ClassLabel(3), &mut rng);
        assert_eq!(out, CascadeOutcome { label: ClassLabel(3), cascaded: false, cost_ms: 1.93 });
    }

    #[test]
    fn out_of_set_input_cascades_to_oracle() {
        let cc = perfect_cascade();
        let mut rng = derive_rng(1, &[]);
        let out = cascaded_classify(&cc, ClassLabel(100), &mut rng);
        assert_eq!(out.label, ClassLabel(100));
        assert!(out.cascaded);
        assert!((out.cost_ms - (1.93 + 28.8)).abs() < 1e-12);
    }

    #[test]
    fn cost_is_exactly_dichotomous() {
        let cc = CascadedClassifier::new(
            SpecializedModel {
                template_name: "T".into(),
                run_cost_ms: 1.93,
                dominant_set: vec![0, 1, 2, 3, 4],
                params: SpecializationParams { a_in: 0.8, e_in_out: 0.15, a_out: 0.9 },
                training_skew: 0.5,
            },
            OracleProfile { accuracy: 0.958, cost_ms: 28.8, num_classes: 2622 },
        )
        .unwrap();
        let mut rng = derive_rng(2, &[]);
        let mut total = 0.0;
        let mut cascades = 0u32;
        let steps = 10_000;
        for i in 0..steps {
            let label = ClassLabel(if i % 10 == 0 { 50 } else { i % 5 });
            let out = cascaded_classify(&cc, label, &mut rng);
            assert!(
                out.cost_ms == 1.93 || out.cost_ms == 1.93 + 28.8,
                "cost {} outside {{R_h, R_h + R*}}",
                out.cost_ms
            );
            assert_eq!(out.cascaded, out.cost_ms > 2.0);
            total += out.cost_ms;
            cascades += out.cascaded as u32;
        }
        // Mean cost identity: R_h + R* * cascade_rate, exact from the log.
        let expect = 1.93 + 28.8 * (cascades as f64 / steps as f64);
        assert!((total / steps as f64 - expect).abs() < 1e-9);
    }

    #[test]
    fn estimate_accuracy_closed_form_points() {
        let p1 = SpecializationParams { a_in: 0.8, e_in_out: 0.0, a_out: 0.5 };
        assert!((estimate_accuracy(1.0, &p1, 0.9) - 0.8).abs() < 1e-15);

        let p2 = SpecializationParams { a_in: 0.7, e_in_out: 0.2, a_out: 0.9 };
        assert!((estimate_accuracy(0.0, &p2, 0.958) - 0.9 * 0.958).abs() < 1e-15);

        let p3 = SpecializationParams { a_in: 0.8, e_in_out: 0.15, a_out: 0.9 };
        let v = estimate_accuracy(0.9, &p3, 0.958);
        let manual = 0.9 * 0.8 + 0.9 * 0.15 * 0.958 + 0.1 * 0.9 * 0.958;
        assert!((v - manual).abs() < 1e-15);
        assert!((v - 0.93555).abs() < 1e-10, "closed form {v}");
    }

    #[test]
    fn rejects_template_costlier_than_oracle() {
        let model = SpecializedModel {
            template_name: "T".into(),
            run_cost_ms: 30.0,
            dominant_set: vec![0],
            params: SpecializationParams { a_in: 1.0, e_in_out: 0.0, a_out: 1.0 },
            training_skew: 0.5,
        };
        let oracle = OracleProfile { accuracy: 0.9, cost_ms: 28.8, num_classes: 10 };
        assert!(CascadedClassifier::new(model, oracle).is_err());
    }
}

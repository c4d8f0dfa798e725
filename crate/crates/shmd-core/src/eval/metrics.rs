//! Program-level detection metrics, plus the two attack-facing fractions
//! (reverse-engineering effectiveness and transferability). Undefined
//! ratios are reported as absent values, never as silent zeros.

use serde::{Deserialize, Serialize};

use crate::attack::{DetectorOracle, EvasiveVariant, ProxyModel};
use crate::dataset::{Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn observe(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Malware, Label::Malware) => self.true_positives += 1,
            (Label::Benign, Label::Malware) => self.false_positives += 1,
            (Label::Benign, Label::Benign) => self.true_negatives += 1,
            (Label::Malware, Label::Benign) => self.false_negatives += 1,
        }
    }

    /// Number of evaluated programs.
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Harmonic mean of precision and sensitivity. Callers guard the
/// `precision + sensitivity > 0` case.
pub fn f1_score(precision: f64, sensitivity: f64) -> f64 {
    2.0 * precision * sensitivity / (precision + sensitivity)
}

/// Ratios over a confusion table. `None` marks a ratio whose denominator
/// is zero for these counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    /// True-positive rate (recall on malware).
    pub sensitivity: Option<f64>,
    /// True-negative rate.
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub counts: ConfusionCounts,
}

pub fn metrics(counts: ConfusionCounts) -> MetricsReport {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let c = counts;
    let precision = ratio(c.true_positives, c.true_positives + c.false_positives);
    let sensitivity = ratio(c.true_positives, c.true_positives + c.false_negatives);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(f1_score(p, s)),
        _ => None,
    };
    MetricsReport {
        accuracy: ratio(c.true_positives + c.true_negatives, c.total()),
        sensitivity,
        specificity: ratio(c.true_negatives, c.true_negatives + c.false_positives),
        precision,
        f1,
        false_positive_rate: ratio(c.false_positives, c.false_positives + c.true_negatives),
        false_negative_rate: ratio(c.false_negatives, c.false_negatives + c.true_positives),
        counts: c,
    }
}

/// Label every trace through the oracle (one program-level decision each)
/// and tally the confusion table against ground truth.
pub fn confusion_over_traces<F: Scalar, O: DetectorOracle<F> + ?Sized>(
    oracle: &mut O,
    traces: &[ProgramTrace],
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for t in traces {
        counts.observe(t.label, oracle.label_trace(t)?);
    }
    Ok(counts)
}

/// Fraction of traces on which the proxy and the victim agree, the victim
/// queried once per trace. This is how well the attacker's copy mimics
/// the real detector.
pub fn re_effectiveness<F: Scalar, O: DetectorOracle<F> + ?Sized>(
    proxy: &ProxyModel,
    victim: &mut O,
    traces: &[ProgramTrace],
    proxy_threshold: f64,
) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::EmptyInput(
            "reverse-engineering effectiveness needs at least one trace".into(),
        ));
    }
    let mut agree = 0usize;
    for t in traces {
        if proxy.label_trace(t, proxy_threshold)? == victim.label_trace(t)? {
            agree += 1;
        }
    }
    Ok(agree as f64 / traces.len() as f64)
}

/// Fraction of evasive variants the victim lets through (labels benign).
/// By construction this plus the victim's detection rate on the same
/// variants is exactly one.
pub fn transferability<F: Scalar, O: DetectorOracle<F> + ?Sized>(
    variants: &[EvasiveVariant],
    victim: &mut O,
) -> Result<f64> {
    if variants.is_empty() {
        return Err(Error::EmptyInput(
            "transferability needs at least one evasive variant".into(),
        ));
    }
    let mut evaded = 0usize;
    for v in variants {
        if victim.label_trace(&v.result)? == Label::Benign {
            evaded += 1;
        }
    }
    Ok(evaded as f64 / variants.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{DeterministicOracle, EvasionPlan};
    use crate::dataset::TraceWindow;
    use crate::model::test_support::tiny_model;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn counts(tp: u64, fp: u64, tn: u64, fne: u64) -> ConfusionCounts {
        ConfusionCounts {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fne,
        }
    }

    #[test]
    fn symmetric_counts_give_point_nine_everywhere() {
        let m = metrics(counts(9, 1, 9, 1));
        for v in [m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1] {
            assert!((v.unwrap() - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_is_the_harmonic_mean_of_the_reported_rates() {
        assert!((f1_score(0.980, 0.926) - 0.952).abs() < 0.0005);
    }

    #[test]
    fn zero_denominators_surface_as_missing_values() {
        let m = metrics(counts(0, 0, 5, 3));
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert!(m.specificity.is_some());
        let empty = metrics(ConfusionCounts::default());
        assert_eq!(empty.accuracy, None);
    }

    fn two_cat_trace(id: &str, label: Label, rows: &[[u64; 2]]) -> ProgramTrace {
        ProgramTrace {
            program_id: id.into(),
            label,
            family: "fam".into(),
            windows: rows
                .iter()
                .map(|r| TraceWindow { counts: r.to_vec(), basic_blocks: 1 })
                .collect(),
        }
    }

    /// Score tracks x0 - x1, so [9,1] windows read malware and [1,9] benign.
    fn contrast_model() -> crate::model::MlpModel<f64> {
        tiny_model(vec![1.0, -1.0, -1.0, 1.0], vec![0.0, 0.0], vec![1.0, -1.0], 0.0)
    }

    #[test]
    fn a_proxy_equal_to_the_victim_is_fully_effective() {
        let m = contrast_model();
        let proxy = ProxyModel::Mlp(m.clone());
        let mut victim = DeterministicOracle::new(&m, 0.5).unwrap();
        let traces = [
            two_cat_trace("a", Label::Malware, &[[9, 1], [8, 2]]),
            two_cat_trace("b", Label::Benign, &[[1, 9], [2, 8]]),
            two_cat_trace("c", Label::Benign, &[[3, 7]]),
        ];
        let e = re_effectiveness(&proxy, &mut victim, &traces, 0.5).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn a_negated_proxy_never_agrees() {
        let m = contrast_model();
        // Mirror the score around 0.5 by flipping the output layer.
        let negated = tiny_model(vec![1.0, -1.0, -1.0, 1.0], vec![0.0, 0.0], vec![-1.0, 1.0], 0.0);
        let proxy = ProxyModel::Mlp(negated);
        let mut victim = DeterministicOracle::new(&m, 0.5).unwrap();
        let traces = [
            two_cat_trace("a", Label::Malware, &[[9, 1]]),
            two_cat_trace("b", Label::Benign, &[[1, 9]]),
        ];
        let e = re_effectiveness(&proxy, &mut victim, &traces, 0.5).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn transfer_and_detection_rates_always_sum_to_one() {
        let m = contrast_model();
        let mut victim = DeterministicOracle::new(&m, 0.5).unwrap();
        let zero_plan = EvasionPlan { per_block: vec![0, 0], epsilon: 0.05, k_per_block: 1 };
        let variant = |id: &str, rows: &[[u64; 2]]| {
            let t = two_cat_trace(id, Label::Malware, rows);
            EvasiveVariant {
                original: t.clone(),
                plan: zero_plan.clone(),
                result: t,
                proxy_detected: true,
            }
        };
        // One variant still reads malware, two slip through.
        let set = [
            variant("v1", &[[9, 1]]),
            variant("v2", &[[1, 9]]),
            variant("v3", &[[2, 8]]),
        ];
        let transfer = transferability(&set, &mut victim).unwrap();
        let detected = set
            .iter()
            .filter(|v| victim.label_trace(&v.result).unwrap() == Label::Malware)
            .count() as f64
            / set.len() as f64;
        assert_eq!(transfer + detected, 1.0);
        assert!((transfer - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let m = contrast_model();
        let proxy = ProxyModel::Mlp(m.clone());
        let mut victim = DeterministicOracle::new(&m, 0.5).unwrap();
        assert!(matches!(
            re_effectiveness(&proxy, &mut victim, &[], 0.5),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            transferability(&[], &mut victim),
            Err(Error::EmptyInput(_))
        ));
    }

    proptest! {
        /// The ratio identities hold for any confusion table.
        #[test]
        fn metric_identities_hold(tp in 0u64..500, fp in 0u64..500, tn in 0u64..500, fne in 0u64..500) {
            let c = counts(tp, fp, tn, fne);
            let m = metrics(c);
            prop_assert_eq!(c.total(), tp + fp + tn + fne);
            if let Some(a) = m.accuracy {
                prop_assert!((a * c.total() as f64 - (tp + tn) as f64).abs() < 1e-9);
            }
            if let (Some(s), Some(fnr)) = (m.sensitivity, m.false_negative_rate) {
                prop_assert!((s + fnr - 1.0).abs() < 1e-12);
            }
            if let (Some(s), Some(fpr)) = (m.specificity, m.false_positive_rate) {
                prop_assert!((s + fpr - 1.0).abs() < 1e-12);
            }
            if let (Some(p), Some(s), Some(f)) = (m.precision, m.sensitivity, m.f1) {
                prop_assert!((f * (p + s) - 2.0 * p * s).abs() < 1e-12);
            }
            for v in [m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1] {
                if let Some(v) = v {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}

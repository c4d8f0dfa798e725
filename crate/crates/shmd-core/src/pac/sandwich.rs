//! Sandwich verification. The toy scenario enumerates a 1-D threshold
//! class exhaustively, so both legs of the bound are checked against the
//! exact optimum. The benchmark's hypothesis class is not enumerable, so
//! the trained proxy stands in as an upper estimate and only the lower
//! leg is asserted.

use crate::attack::{reverse_engineer, DetectorOracle, ProxyConfig, StochasticOracle};
use crate::dataset::{Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::pac::{
    disagreement_from_labels, lower_bound, upper_bound, BoundsReport, DisagreementMatrix,
    PolicyVector,
};
use crate::vos::StochasticEngine;

/// Threshold classifiers over a finite scalar grid: everything about the
/// bound can be computed exactly here.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyThresholdScenario {
    /// Input points, ascending.
    pub grid: Vec<f64>,
    /// Ground truth: points at or above this threshold are malware.
    pub truth_threshold: f64,
    /// One threshold per detector instance.
    pub instance_thresholds: Vec<f64>,
    pub policy: PolicyVector,
}

impl Default for ToyThresholdScenario {
    fn default() -> Self {
        ToyThresholdScenario {
            grid: (0..11).map(f64::from).collect(),
            truth_threshold: 5.0,
            instance_thresholds: vec![4.0, 7.0],
            policy: PolicyVector::uniform(2).unwrap(),
        }
    }
}

fn threshold_label(threshold: f64, x: f64) -> Label {
    if x >= threshold {
        Label::Malware
    } else {
        Label::Benign
    }
}

/// Fraction of grid points where two thresholds disagree.
fn threshold_disagreement(grid: &[f64], a: f64, b: f64) -> f64 {
    let differ = grid
        .iter()
        .filter(|&&x| threshold_label(a, x) != threshold_label(b, x))
        .count();
    differ as f64 / grid.len() as f64
}

impl ToyThresholdScenario {
    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::EmptyInput("toy scenario with an empty grid".into()));
        }
        if self.instance_thresholds.len() != self.policy.len() {
            return Err(Error::Dimension(format!(
                "{} instances but policy covers {}",
                self.instance_thresholds.len(),
                self.policy.len()
            )));
        }
        if self.instance_thresholds.len() < 2 {
            return Err(Error::Config("a mixture needs at least two instances".into()));
        }
        Ok(())
    }

    /// Policy-weighted disagreement of one fixed threshold classifier
    /// against the instance mixture.
    pub fn mixture_disagreement(&self, classifier_threshold: f64) -> f64 {
        self.instance_thresholds
            .iter()
            .zip(self.policy.weights())
            .map(|(&t, &p)| p * threshold_disagreement(&self.grid, classifier_threshold, t))
            .sum()
    }

    /// Exact best achievable mixture disagreement over the whole class,
    /// by enumeration. Labels only change at grid points, so the grid
    /// values plus one sentinel above the maximum cover every distinct
    /// classifier.
    fn exact_class_optimum(&self) -> f64 {
        let max = self.grid.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        self.grid
            .iter()
            .copied()
            .chain(std::iter::once(max + 1.0))
            .map(|t| self.mixture_disagreement(t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Check `lower <= exact optimum <= upper` on the toy class, exactly.
/// Returns the report on success; a violation carries every input needed
/// to replay it.
pub fn verify_toy_sandwich(scenario: &ToyThresholdScenario) -> Result<BoundsReport> {
    scenario.validate()?;
    let n = scenario.instance_thresholds.len();
    let mut delta = vec![vec![0.0; n]; n];
    for k in 0..n {
        for r in k + 1..n {
            let d = threshold_disagreement(
                &scenario.grid,
                scenario.instance_thresholds[k],
                scenario.instance_thresholds[r],
            );
            delta[k][r] = d;
            delta[r][k] = d;
        }
    }
    let delta = DisagreementMatrix::new(delta, scenario.grid.len())?;
    let lower = lower_bound(&scenario.policy, &delta)?;

    let instance_errors: Vec<f64> = scenario
        .instance_thresholds
        .iter()
        .map(|&t| threshold_disagreement(&scenario.grid, t, scenario.truth_threshold))
        .collect();
    let upper = upper_bound(&instance_errors)?;
    let exact = scenario.exact_class_optimum();

    if lower > exact + 1e-12 || exact > upper + 1e-12 {
        return Err(Error::Sandwich(format!(
            "toy class: lower {lower} <= exact {exact} <= upper {upper} failed \
             (grid {:?}, truth {}, instances {:?}, policy {:?})",
            scenario.grid,
            scenario.truth_threshold,
            scenario.instance_thresholds,
            scenario.policy.weights(),
        )));
    }
    Ok(BoundsReport {
        lower,
        upper,
        empirical_proxy_error: exact,
        instance_errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSandwichConfig {
    /// Fault realizations used to estimate the disagreement matrix.
    pub n_instances: usize,
    pub proxy: ProxyConfig,
    /// Decision threshold shared by the instances, the oracle, and the
    /// proxy.
    pub threshold: f64,
}

impl Default for BenchmarkSandwichConfig {
    fn default() -> Self {
        BenchmarkSandwichConfig {
            n_instances: 10,
            proxy: ProxyConfig::default(),
            threshold: 0.5,
        }
    }
}

/// Check the lower leg on the real pipeline: estimate the disagreement
/// matrix from fault realizations of `engine`, reverse engineer a proxy
/// through its oracle, and require that the proxy's window-level
/// disagreement with the stochastic victim is at least the bound. The
/// policy over instances is uniform (physical randomness gives no
/// instance preference).
pub fn verify_benchmark_sandwich(
    engine: &StochasticEngine,
    attacker_traces: &[ProgramTrace],
    test_traces: &[ProgramTrace],
    cfg: &BenchmarkSandwichConfig,
) -> Result<BoundsReport> {
    let mut inputs = Vec::new();
    let mut truths = Vec::new();
    for t in test_traces {
        for w in &t.windows {
            inputs.push(engine.mlp().quantize_input(&w.features::<f64>())?);
            truths.push(t.label);
        }
    }
    if inputs.is_empty() {
        return Err(Error::EmptyInput("no test windows for the bounds check".into()));
    }

    let labels = engine.sample_instance_outputs(&inputs, cfg.n_instances, cfg.threshold)?;
    let delta = DisagreementMatrix::new(disagreement_from_labels(&labels), inputs.len())?;
    let policy = PolicyVector::uniform(cfg.n_instances)?;
    let lower = lower_bound(&policy, &delta)?;

    let instance_errors: Vec<f64> = labels
        .iter()
        .map(|row| {
            row.iter().zip(&truths).filter(|(a, b)| a != b).count() as f64 / inputs.len() as f64
        })
        .collect();
    let upper = upper_bound(&instance_errors)?;

    // One oracle for both reverse engineering and the disagreement pass:
    // its fault stream keeps advancing, so the proxy is scored against
    // fresh victim draws.
    let mut oracle = StochasticOracle::new(engine.clone(), cfg.threshold);
    let proxy = reverse_engineer(&mut oracle, attacker_traces, &cfg.proxy)?;
    let mut differ = 0usize;
    for t in test_traces {
        for w in &t.windows {
            let x = w.features::<f64>();
            let victim = oracle.label_window(x.as_slice())?;
            if proxy.label(&x, cfg.threshold)? != victim {
                differ += 1;
            }
        }
    }
    let proxy_error = differ as f64 / inputs.len() as f64;

    if lower > proxy_error + 1e-12 {
        return Err(Error::Sandwich(format!(
            "benchmark: lower {lower} exceeds proxy disagreement {proxy_error} \
             (fault_rate {}, rng_seed {}, {} instances over {} inputs)",
            engine.fault().fault_rate,
            engine.fault().rng_seed,
            cfg.n_instances,
            inputs.len(),
        )));
    }
    Ok(BoundsReport {
        lower,
        upper,
        empirical_proxy_error: proxy_error,
        instance_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic_corpus, windows_with_labels, CorpusSpec};
    use crate::model::{train, TrainConfig};
    use crate::seeds::rng_from;
    use crate::vos::{ErrorMode, FaultModel, QuantizedMlp};
    use rand::Rng;

    #[test]
    fn default_toy_scenario_matches_hand_computation() {
        // Instances at 4 and 7 disagree on {4, 5, 6}: 3 of 11 points.
        // With a uniform two-instance policy the lower bound is 3/22, the
        // class optimum lands on it exactly (any threshold between the
        // instances is optimal), and the instances err on 1 and 2 points
        // against truth at 5, so the upper bound is 2 * 2/11.
        let report = verify_toy_sandwich(&ToyThresholdScenario::default()).unwrap();
        assert!((report.lower - 3.0 / 22.0).abs() < 1e-12);
        assert!((report.empirical_proxy_error - 3.0 / 22.0).abs() < 1e-12);
        assert!((report.upper - 4.0 / 11.0).abs() < 1e-12);
        assert!((report.instance_errors[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((report.instance_errors[1] - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn every_fixed_threshold_classifier_respects_the_lower_bound() {
        let scenario = ToyThresholdScenario {
            instance_thresholds: vec![2.0, 5.0, 8.0],
            policy: PolicyVector::new(vec![0.2, 0.3, 0.5]).unwrap(),
            ..ToyThresholdScenario::default()
        };
        let report = verify_toy_sandwich(&scenario).unwrap();
        let mut rng = rng_from(77, "toy-classifiers", 0);
        for _ in 0..20 {
            let t: f64 = rng.gen_range(-1.0..12.0);
            let observed = scenario.mixture_disagreement(t);
            assert!(
                observed >= report.lower - 1e-12,
                "threshold {t}: disagreement {observed} below bound {}",
                report.lower
            );
        }
    }

    #[test]
    fn degenerate_toy_scenarios_are_rejected() {
        let mut s = ToyThresholdScenario::default();
        s.grid.clear();
        assert!(verify_toy_sandwich(&s).is_err());
        let s = ToyThresholdScenario {
            instance_thresholds: vec![4.0, 7.0, 9.0],
            ..ToyThresholdScenario::default()
        };
        assert!(matches!(verify_toy_sandwich(&s), Err(Error::Dimension(_))));
    }

    fn benchmark_parts() -> (QuantizedMlp, Vec<ProgramTrace>, Vec<ProgramTrace>) {
        // Two families keep the near-duplicate family in play, and the reduced
        // separation leaves genuinely borderline windows; without those the
        // victim never flickers and the bound degenerates.
        let spec = CorpusSpec {
            n_malware: 30,
            n_benign: 30,
            n_families: 2,
            windows_per_program_range: (3, 5),
            counts_per_window: 1000,
            class_separation: 1.2,
            seed: 78,
            ..CorpusSpec::default()
        };
        let train_corpus = generate_synthetic_corpus(&spec).unwrap();
        let attacker = generate_synthetic_corpus(&CorpusSpec { seed: 79, ..spec }).unwrap();
        let test = generate_synthetic_corpus(&CorpusSpec {
            n_malware: 15,
            n_benign: 15,
            seed: 80,
            ..spec
        })
        .unwrap();
        let data = windows_with_labels::<f64>(&train_corpus);
        let model = train(&data, &TrainConfig { epochs: 10, ..TrainConfig::default() }).unwrap();
        (QuantizedMlp::from_model(&model).unwrap(), attacker, test)
    }

    #[test]
    fn clean_benchmark_has_a_zero_lower_bound() {
        let (q, attacker, test) = benchmark_parts();
        let engine = StochasticEngine::new(q, FaultModel::default()).unwrap();
        let cfg = BenchmarkSandwichConfig {
            n_instances: 5,
            proxy: ProxyConfig {
                train: TrainConfig { epochs: 5, ..TrainConfig::default() },
                ..ProxyConfig::default()
            },
            ..BenchmarkSandwichConfig::default()
        };
        let report = verify_benchmark_sandwich(&engine, &attacker, &test, &cfg).unwrap();
        assert_eq!(report.lower, 0.0);
        assert!(report.instance_errors.iter().all(|e| (0.0..=1.0).contains(e)));
    }

    #[test]
    fn faulty_benchmark_respects_the_lower_leg() {
        let (q, attacker, test) = benchmark_parts();
        let fault = FaultModel {
            fault_rate: 0.5,
            error_mode: ErrorMode::UniformBitFlip,
            rng_seed: 81,
        };
        let engine = StochasticEngine::new(q, fault).unwrap();
        let cfg = BenchmarkSandwichConfig {
            n_instances: 10,
            proxy: ProxyConfig {
                train: TrainConfig { epochs: 5, ..TrainConfig::default() },
                ..ProxyConfig::default()
            },
            ..BenchmarkSandwichConfig::default()
        };
        let report = verify_benchmark_sandwich(&engine, &attacker, &test, &cfg).unwrap();
        assert!(report.lower <= report.empirical_proxy_error + 1e-12);
        assert!(report.lower > 0.0);
    }
}

//! Learnability bounds for reverse engineering a randomized detector.
//! The detector is a mixture of fault-perturbed instances drawn by a
//! policy; how well any single classifier can mimic the mixture is
//! sandwiched between a disagreement-based lower bound and twice the
//! worst instance error.

mod sandwich;

pub use sandwich::{
    verify_benchmark_sandwich, verify_toy_sandwich, BenchmarkSandwichConfig, ToyThresholdScenario,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::vos::StochasticEngine;

/// Mixing weights over detector instances: the probability that a given
/// inference lands on each instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyVector {
    p: Vec<f64>,
}

impl PolicyVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("policy over zero instances".into()));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "policy weights must be non-negative and finite".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "policy weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(PolicyVector { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("policy over zero instances".into()));
        }
        Ok(PolicyVector { p: vec![1.0 / n as f64; n] })
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Pairwise instance disagreement: entry (k, r) estimates the probability
/// that instances k and r label a random input differently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementMatrix {
    delta: Vec<Vec<f64>>,
    /// Inputs behind each estimate.
    sample_count: usize,
}

impl DisagreementMatrix {
    pub fn new(delta: Vec<Vec<f64>>, sample_count: usize) -> Result<Self> {
        let n = delta.len();
        if n == 0 {
            return Err(Error::EmptyInput("disagreement matrix with no instances".into()));
        }
        if delta.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("disagreement matrix must be square".into()));
        }
        for k in 0..n {
            if delta[k][k] != 0.0 {
                return Err(Error::Config(format!(
                    "diagonal entry ({k}, {k}) is {}, expected 0",
                    delta[k][k]
                )));
            }
            for r in 0..n {
                let v = delta[k][r];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!(
                        "entry ({k}, {r}) is {v}, outside [0, 1]"
                    )));
                }
                if v != delta[r][k] {
                    return Err(Error::Config(format!(
                        "entries ({k}, {r}) and ({r}, {k}) differ: {v} vs {}",
                        delta[r][k]
                    )));
                }
            }
        }
        Ok(DisagreementMatrix { delta, sample_count })
    }

    pub fn n_instances(&self) -> usize {
        self.delta.len()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn get(&self, k: usize, r: usize) -> f64 {
        self.delta[k][r]
    }

    /// Mean of the off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.delta.len();
        if n < 2 {
            return 0.0;
        }
        let sum: f64 = (0..n)
            .flat_map(|k| (0..n).filter(move |&r| r != k).map(move |r| self.delta[k][r]))
            .sum();
        sum / (n * (n - 1)) as f64
    }
}

/// Estimate the disagreement matrix by drawing `n_instances` fault
/// realizations of the engine and comparing their labels over `inputs`
/// (already quantized feature vectors).
pub fn estimate_delta(
    engine: &StochasticEngine,
    inputs: &[Vec<i32>],
    n_instances: usize,
    threshold: f64,
) -> Result<DisagreementMatrix> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput(
            "disagreement estimation needs at least one input".into(),
        ));
    }
    let labels = engine.sample_instance_outputs(inputs, n_instances, threshold)?;
    let delta = disagreement_from_labels(&labels);
    DisagreementMatrix::new(delta, inputs.len())
}

/// Pairwise disagreement fractions between label rows (one row per
/// instance, one column per input).
pub(crate) fn disagreement_from_labels(labels: &[Vec<Label>]) -> Vec<Vec<f64>> {
    let n = labels.len();
    let m = labels.first().map_or(0, Vec::len);
    let mut delta = vec![vec![0.0; n]; n];
    for k in 0..n {
        for r in k + 1..n {
            let differ = labels[k]
                .iter()
                .zip(&labels[r])
                .filter(|(a, b)| a != b)
                .count();
            let frac = differ as f64 / m as f64;
            delta[k][r] = frac;
            delta[r][k] = frac;
        }
    }
    delta
}

/// Theorem leg one: no mimic can disagree with the mixture less than the
/// policy-weighted disagreement against the most central instance. The
/// index reading (minimize over the reference instance r, sum over the
/// others) is isolated here so it can be swapped wholesale.
pub fn lower_bound(policy: &PolicyVector, delta: &DisagreementMatrix) -> Result<f64> {
    let n = delta.n_instances();
    if policy.len() != n {
        return Err(Error::Dimension(format!(
            "policy covers {} instances, matrix has {n}",
            policy.len()
        )));
    }
    let p = policy.weights();
    let bound = (0..n)
        .map(|r| {
            (0..n)
                .filter(|&k| k != r)
                .map(|k| p[k] * delta.get(k, r))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(bound)
}

/// Theorem leg two: twice the worst single-instance error against ground
/// truth, clamped to 1 since it bounds a probability.
pub fn upper_bound(instance_errors: &[f64]) -> Result<f64> {
    if instance_errors.is_empty() {
        return Err(Error::EmptyInput("no instance errors to bound".into()));
    }
    for (k, e) in instance_errors.iter().enumerate() {
        if !e.is_finite() || !(0.0..=1.0).contains(e) {
            return Err(Error::Config(format!(
                "instance error {k} is {e}, outside [0, 1]"
            )));
        }
    }
    let worst = instance_errors.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok((2.0 * worst).min(1.0))
}

/// Both bounds plus the empirical quantity they sandwich. On the
/// enumerable toy class the middle value is exact; on the benchmark it
/// is the trained proxy's disagreement, an upper estimate of the best
/// achievable mimic error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub empirical_proxy_error: f64,
    /// Per-instance error against ground truth.
    pub instance_errors: Vec<f64>,
}

/// CSV rendering of per-rate bounds reports:
/// `fault_rate,lower,upper,proxy_error`.
pub fn bounds_table(rows: &[(f64, BoundsReport)]) -> String {
    use std::fmt::Write;
    let mut out = String::from("fault_rate,lower,upper,proxy_error\n");
    for (rate, report) in rows {
        let _ = writeln!(
            out,
            "{rate:.6},{:.6},{:.6},{:.6}",
            report.lower, report.upper, report.empirical_proxy_error
        );
    }
    out
}

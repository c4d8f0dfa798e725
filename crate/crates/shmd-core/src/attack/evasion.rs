//! Evasion proper: pick instruction categories whose injection lowers the
//! proxy's malware score, then pad every basic block of the trace with
//! them. Injection can only add instructions (removing real ones would
//! break the program), so only categories with a negative score gradient
//! are usable.

use serde::{Deserialize, Serialize};

use super::proxy::{ProxyConfig, ProxyModel};
use crate::dataset::{Label, ProgramTrace};
use crate::error::{Error, Result};

/// Whose data the attacker trains the proxy on: their own collection or
/// (the stronger assumption) the victim's training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AttackerData,
    VictimData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub proxy: ProxyConfig,
    /// Injection budget per category, as a fraction of the trace's mean
    /// instructions per basic block.
    pub epsilon: f64,
    /// How many categories get injected into each block.
    pub k_per_block: usize,
    /// Rounds of identify-then-inject, recomputing the gradient at the
    /// already-padded trace each round.
    pub iterations: usize,
    pub scenario: Scenario,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            proxy: ProxyConfig::default(),
            epsilon: 0.05,
            k_per_block: 1,
            iterations: 1,
            scenario: Scenario::AttackerData,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.k_per_block == 0 {
            return Err(Error::Config("k_per_block must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        self.proxy.train.validate()
    }
}

/// Where the score gradient points at the probe features, and which
/// categories are worth injecting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvasionDirection {
    /// d(score)/d(feature) at the probe point.
    pub gradient: Vec<f64>,
    /// Categories with negative gradient, steepest first; ties go to the
    /// lower category index.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvasionOutcome {
    Direction(EvasionDirection),
    /// Every gradient entry is non-negative: padding with any category
    /// would raise the malware score, so this probe point offers nothing.
    NoUsableDirection,
}

/// Step size for the score probes that stand in for a gradient when the
/// proxy is not differentiable.
const PROBE_DELTA: f64 = 0.01;

/// Rank injection candidates at the probe features `x` (normally the
/// trace's mean window features). Differentiable proxies answer with
/// their analytic gradient; the stump ensemble is probed by adding a
/// small amount of each category's mass and renormalizing, which is
/// exactly what injection does to a frequency vector.
pub fn identify_evasion_features(proxy: &ProxyModel, x: &[f64]) -> Result<EvasionOutcome> {
    let gradient = match proxy.score_gradient(x)? {
        Some(g) => g,
        None => probe_gradient(proxy, x)?,
    };
    let mut selected: Vec<usize> = (0..gradient.len()).filter(|&i| gradient[i] < 0.0).collect();
    selected.sort_by(|&a, &b| {
        gradient[b]
            .abs()
            .total_cmp(&gradient[a].abs())
            .then(a.cmp(&b))
    });
    if selected.is_empty() {
        Ok(EvasionOutcome::NoUsableDirection)
    } else {
        Ok(EvasionOutcome::Direction(EvasionDirection { gradient, selected }))
    }
}

fn probe_gradient(proxy: &ProxyModel, x: &[f64]) -> Result<Vec<f64>> {
    let base = proxy.score(x)?;
    let mut g = Vec::with_capacity(x.len());
    let mut probe = vec![0.0; x.len()];
    for i in 0..x.len() {
        for (p, v) in probe.iter_mut().zip(x) {
            *p = v / (1.0 + PROBE_DELTA);
        }
        probe[i] += PROBE_DELTA / (1.0 + PROBE_DELTA);
        g.push((proxy.score(&probe)? - base) / PROBE_DELTA);
    }
    Ok(g)
}

/// Concrete injection recipe: how many instructions of each category go
/// into every basic block of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvasionPlan {
    pub per_block: Vec<u64>,
    pub epsilon: f64,
    pub k_per_block: usize,
}

/// Turn a direction into a plan for `trace`: the top `k_per_block`
/// categories each get `ceil(epsilon * mean instructions per block)`
/// injected copies per block (at least one, so a tiny budget still acts).
pub fn plan_from_direction(
    direction: &EvasionDirection,
    trace: &ProgramTrace,
    epsilon: f64,
    k_per_block: usize,
) -> Result<EvasionPlan> {
    let total: u64 = trace.windows.iter().map(|w| w.total()).sum();
    let blocks: u64 = trace.windows.iter().map(|w| w.basic_blocks).sum();
    if blocks == 0 {
        return Err(Error::EmptyInput(format!(
            "trace {} has no basic blocks",
            trace.program_id
        )));
    }
    let per_block_mean = total as f64 / blocks as f64;
    let per_category = ((epsilon * per_block_mean).ceil() as u64).max(1);
    let mut per_block = vec![0u64; direction.gradient.len()];
    for &c in direction.selected.iter().take(k_per_block) {
        per_block[c] = per_category;
    }
    Ok(EvasionPlan { per_block, epsilon, k_per_block })
}

/// Apply a plan: every window gains `per_block[c] * basic_blocks`
/// instructions of category `c`. Label and identity are kept; the result
/// is still the same (malicious) program, just padded.
pub fn synthesize_evasive_trace(trace: &ProgramTrace, plan: &EvasionPlan) -> Result<ProgramTrace> {
    let mut out = trace.clone();
    for w in &mut out.windows {
        if w.counts.len() != plan.per_block.len() {
            return Err(Error::Dimension(format!(
                "plan covers {} categories, window has {}",
                plan.per_block.len(),
                w.counts.len()
            )));
        }
        for (c, add) in w.counts.iter_mut().zip(&plan.per_block) {
            *c += add * w.basic_blocks;
        }
    }
    Ok(out)
}

/// One attacked program: the padded trace plus the recipe that produced
/// it and the attacker's own check against the proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvasiveVariant {
    pub original: ProgramTrace,
    /// Cumulative injection over all iterations. All zeros means no
    /// usable direction ever existed for this trace.
    pub plan: EvasionPlan,
    pub result: ProgramTrace,
    /// Whether the proxy still flags the padded trace.
    pub proxy_detected: bool,
}

/// Attack every malware trace in `traces`. Benign traces are skipped
/// (there is nothing to evade with a clean program). Each round probes
/// the gradient at the current mean features, plans, and injects; a trace
/// with no usable direction passes through unmodified.
pub fn generate_evasive_set(
    proxy: &ProxyModel,
    traces: &[ProgramTrace],
    cfg: &AttackConfig,
) -> Result<Vec<EvasiveVariant>> {
    cfg.validate()?;
    let malware: Vec<&ProgramTrace> =
        traces.iter().filter(|t| t.label == Label::Malware).collect();
    if malware.is_empty() {
        return Err(Error::EmptyInput(
            "no malware traces to build evasive variants from".into(),
        ));
    }
    let threshold = cfg.proxy.train.threshold;
    let mut out = Vec::with_capacity(malware.len());
    for t in malware {
        let mut current = (*t).clone();
        let mut cumulative: Option<Vec<u64>> = None;
        for _ in 0..cfg.iterations {
            let x = current.mean_features::<f64>();
            match identify_evasion_features(proxy, &x)? {
                EvasionOutcome::Direction(d) => {
                    let plan = plan_from_direction(&d, &current, cfg.epsilon, cfg.k_per_block)?;
                    current = synthesize_evasive_trace(&current, &plan)?;
                    let acc = cumulative
                        .get_or_insert_with(|| vec![0u64; plan.per_block.len()]);
                    for (a, p) in acc.iter_mut().zip(&plan.per_block) {
                        *a += p;
                    }
                }
                EvasionOutcome::NoUsableDirection => break,
            }
        }
        let plan = EvasionPlan {
            per_block: cumulative
                .unwrap_or_else(|| vec![0u64; current.windows[0].counts.len()]),
            epsilon: cfg.epsilon,
            k_per_block: cfg.k_per_block,
        };
        let proxy_detected = proxy.label_trace(&current, threshold)? == Label::Malware;
        out.push(EvasiveVariant {
            original: t.clone(),
            plan,
            result: current,
            proxy_detected,
        });
    }
    Ok(out)
}

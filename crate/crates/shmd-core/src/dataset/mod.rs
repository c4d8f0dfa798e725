//! Traces, windows, feature vectors and the synthetic corpus.
//!
//! A program execution is a [`ProgramTrace`]: an ordered list of
//! [`TraceWindow`]s, each holding per-category instruction counts for a fixed
//! taxonomy of [`FEATURE_COUNT`] instruction categories plus the number of
//! basic blocks executed in that window. Detectors never see raw counts; they
//! see the per-window [`FeatureVector`] of category frequencies.
//!
//! Submodules:
//! - [`gen`]: seeded synthetic corpus generator.
//! - [`folds`]: stratified four-fold split with rotation.
//! - [`io`]: line-oriented trace file format.

mod folds;
mod gen;
mod io;

pub use folds::{split_folds, split_folds_rotated, CorpusSplits, FOLD_COUNT};
pub use gen::{generate_synthetic_corpus, CorpusSpec};
pub use io::{load_traces, save_traces};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Number of instruction categories in the fixed taxonomy. Category indices
/// are opaque: nothing downstream attaches meaning to a particular index.
pub const FEATURE_COUNT: usize = 50;

/// Ground-truth or predicted class of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malware,
    Benign,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Malware => write!(f, "malware"),
            Label::Benign => write!(f, "benign"),
        }
    }
}

/// Instruction-category counts observed over one execution window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceWindow {
    /// One count per instruction category, `FEATURE_COUNT` entries.
    pub counts: Vec<u64>,
    /// Basic blocks executed in this window; at least 1.
    pub basic_blocks: u64,
}

impl TraceWindow {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != FEATURE_COUNT {
            return Err(Error::Dimension(format!(
                "window has {} categories, expected {FEATURE_COUNT}",
                self.counts.len()
            )));
        }
        if self.total() == 0 {
            return Err(Error::EmptyInput("window with zero total count".into()));
        }
        if self.basic_blocks == 0 {
            return Err(Error::Config("window basic_blocks must be at least 1".into()));
        }
        Ok(())
    }

    /// Category frequencies for this window. Requires a validated window.
    pub fn features<F: Scalar>(&self) -> FeatureVector<F> {
        let total = self.total() as f64;
        let vals = self
            .counts
            .iter()
            .map(|&c| F::from_f64_lossy(c as f64 / total))
            .collect();
        FeatureVector(vals)
    }
}

/// Per-window instruction-category frequencies: `FEATURE_COUNT` non-negative
/// entries summing to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<F>(Vec<F>);

impl<F: Scalar> FeatureVector<F> {
    pub fn new(vals: Vec<F>) -> Result<Self> {
        if vals.len() != FEATURE_COUNT {
            return Err(Error::Dimension(format!(
                "feature vector has {} entries, expected {FEATURE_COUNT}",
                vals.len()
            )));
        }
        let mut sum = 0.0f64;
        for (i, v) in vals.iter().enumerate() {
            let v = v.to_f64_lossy();
            if !(0.0..=1.0 + 1e-9).contains(&v) {
                return Err(Error::Config(format!(
                    "feature {i} is {v}, outside [0, 1]"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "feature vector sums to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(FeatureVector(vals))
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }
}

impl<F> std::ops::Deref for FeatureVector<F> {
    type Target = [F];
    fn deref(&self) -> &[F] {
        &self.0
    }
}

/// One traced program run: identity, ground truth and its windows in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramTrace {
    pub program_id: String,
    pub label: Label,
    pub family: String,
    pub windows: Vec<TraceWindow>,
}

impl ProgramTrace {
    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::EmptyInput(format!(
                "trace {} has no windows",
                self.program_id
            )));
        }
        for w in &self.windows {
            w.validate()?;
        }
        Ok(())
    }

    /// Mean of the per-window feature vectors. Still a frequency vector: the
    /// mean of simplex points stays on the simplex.
    pub fn mean_features<F: Scalar>(&self) -> FeatureVector<F> {
        let n = F::from_f64_lossy(self.windows.len() as f64);
        let mut acc = vec![F::zero(); FEATURE_COUNT];
        for w in &self.windows {
            for (a, v) in acc.iter_mut().zip(w.features::<F>().iter()) {
                *a = *a + *v;
            }
        }
        for a in acc.iter_mut() {
            *a = *a / n;
        }
        FeatureVector(acc)
    }
}

/// Flatten traces into per-window training pairs, each window carrying its
/// program's ground-truth label.
pub fn windows_with_labels<F: Scalar>(traces: &[ProgramTrace]) -> Vec<(FeatureVector<F>, Label)> {
    traces
        .iter()
        .flat_map(|t| t.windows.iter().map(move |w| (w.features(), t.label)))
        .collect()
}

//! Seeded synthetic corpus generator.
//!
//! Families are Dirichlet-multinomial sources over the instruction-category
//! simplex. Each family mean is a common background profile plus two kinds of
//! structure:
//!
//! - a small block of *signature* categories unique to the family, and
//! - a shared *class-signal* bump (one category group for malware, a disjoint
//!   one for benign) scaled by a per-family tier.
//!
//! Tiers fall from 1.0 towards [`CorpusSpec::twin_overlap`]; the last family
//! of each class forms a *mimic pair*. Both members wear a muted copy of the
//! first benign family's signature ([`CorpusSpec::twin_mimicry`]) and keep
//! only a sliver of class signal, so the pair straddles the class boundary:
//! malware posing as a popular benign app, next to a niche benign app that
//! resembles the impostor more than it resembles its own class. That keeps
//! whole-corpus separability realistic (high but not perfect) and produces a
//! population of low-margin programs whose labels respond first when
//! inference becomes unreliable. Remaining families stay linearly separable
//! by the class-signal groups alone.
//!
//! Every program also opens in the same place: when a trace has at least two
//! windows, its first window is drawn from a family-free, benign-leaning
//! profile standing in for loader and runtime-startup code
//! ([`CorpusSpec::warmup_lean`]). A detector flags malware only once the
//! program's own behavior starts, so trace-level detection latency is a real
//! quantity with room to move in either direction when inference gets noisy.
//!
//! Per trace, a category distribution is drawn once from the family Dirichlet
//! (programs differ within a family), then every window draws a multinomial
//! with that distribution (windows of one program resemble each other).

use super::{Label, ProgramTrace, TraceWindow, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::seeds::rng_from;
use rand::distributions::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Gamma};
use serde::{Deserialize, Serialize};

/// Size of each family signature block.
const SIGNATURE_CATS: usize = 4;
/// Size of each class-signal category group.
const CLASS_GROUP_CATS: usize = 5;

/// Everything the generator needs; two corpora from equal specs are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_malware: usize,
    pub n_benign: usize,
    /// Families per class.
    pub n_families: usize,
    /// Inclusive bounds on windows per program, warmup window included.
    pub windows_per_program_range: (usize, usize),
    pub seed: u64,
    /// Instructions observed per window.
    pub counts_per_window: u64,
    /// basic_blocks = max(1, window_total / block_divisor).
    pub block_divisor: u64,
    /// Dirichlet sharpness; larger keeps traces closer to the family mean.
    pub concentration: f64,
    /// Weight of the class-signal bump before tier scaling.
    pub class_separation: f64,
    /// Tier of the twin families; small values park them near the boundary.
    pub twin_overlap: f64,
    /// Weight of each family's signature block.
    pub signature_boost: f64,
    /// Fraction of `signature_boost` the mimic pair copies from the first
    /// benign family. Around 0.5 the copy is strong enough to cancel the
    /// "no benign signature" prior a detector learns, without looking like
    /// the genuine app.
    pub twin_mimicry: f64,
    /// Benign-group weight of the warmup profile, as a fraction of
    /// `class_separation`. Programs with at least two windows open on one
    /// window of shared startup code drawn from this profile.
    pub warmup_lean: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_malware: 3000,
            n_benign: 600,
            n_families: 5,
            windows_per_program_range: (9, 15),
            seed: 7,
            counts_per_window: 10_000,
            block_divisor: 8,
            concentration: 220.0,
            class_separation: 2.2,
            twin_overlap: 0.05,
            signature_boost: 1.4,
            twin_mimicry: 0.5,
            warmup_lean: 0.55,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.windows_per_program_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "windows_per_program_range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
            )));
        }
        if self.n_families == 0 {
            return Err(Error::Config("n_families must be at least 1".into()));
        }
        if self.counts_per_window == 0 {
            return Err(Error::Config("counts_per_window must be at least 1".into()));
        }
        if self.block_divisor == 0 {
            return Err(Error::Config("block_divisor must be at least 1".into()));
        }
        for (name, v) in [
            ("concentration", self.concentration),
            ("class_separation", self.class_separation),
            ("signature_boost", self.signature_boost),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be finite and positive, got {v}")));
            }
        }
        for (name, v) in [("twin_overlap", self.twin_overlap), ("twin_mimicry", self.twin_mimicry)] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if !self.warmup_lean.is_finite() || !(0.0..=1.0).contains(&self.warmup_lean) {
            return Err(Error::Config(format!(
                "warmup_lean must be in [0, 1], got {}",
                self.warmup_lean
            )));
        }
        Ok(())
    }

    /// Class-signal tier of family `family` (0-based) among `self.n_families`.
    pub(crate) fn family_tier(&self, family: usize) -> f64 {
        let k = self.n_families;
        if k == 1 {
            1.0
        } else if family == k - 1 {
            self.twin_overlap
        } else {
            // Spread the non-twin families from 1.0 down to 0.35 so their
            // margins destabilize at different fault levels, not all at once.
            1.0 - 0.65 * family as f64 / (k - 1).max(1) as f64
        }
    }

    /// Mean category distribution of `(label, family)`.
    pub(crate) fn family_mean(&self, label: Label, family: usize) -> Vec<f64> {
        let mut w = vec![1.0f64; FEATURE_COUNT];

        // Signature block: every family gets its own except the mimic pair,
        // which wears a muted copy of the first benign family's block. Blocks
        // tile the categories below the class groups and wrap if there are
        // very many families.
        let twin = self.n_families > 1 && family == self.n_families - 1;
        let (global, boost) = if twin {
            (self.n_families, self.signature_boost * self.twin_mimicry)
        } else {
            match label {
                Label::Malware => (family, self.signature_boost),
                Label::Benign => (self.n_families + family, self.signature_boost),
            }
        };
        let sig_region = FEATURE_COUNT - 2 * CLASS_GROUP_CATS;
        let sig_base = (global * SIGNATURE_CATS) % sig_region;
        for c in 0..SIGNATURE_CATS {
            w[(sig_base + c) % sig_region] += boost;
        }

        let tier = self.family_tier(family);
        let group_base = match label {
            Label::Malware => FEATURE_COUNT - 2 * CLASS_GROUP_CATS,
            Label::Benign => FEATURE_COUNT - CLASS_GROUP_CATS,
        };
        for c in 0..CLASS_GROUP_CATS {
            w[group_base + c] += self.class_separation * tier;
        }
        if twin {
            // The imitation extends to runtime behavior: both members also
            // show the imitated benign family's class-group activity, which
            // pulls the pair to the boundary no matter how a detector
            // weighs the signature categories.
            let ben_base = FEATURE_COUNT - CLASS_GROUP_CATS;
            for c in 0..CLASS_GROUP_CATS {
                w[ben_base + c] += self.class_separation * self.twin_mimicry;
            }
        }

        normalized(w)
    }

    /// Mean category distribution of the shared warmup window: flat
    /// background with a mild benign lean and no family signature.
    pub(crate) fn warmup_mean(&self) -> Vec<f64> {
        let mut w = vec![1.0f64; FEATURE_COUNT];
        let ben_base = FEATURE_COUNT - CLASS_GROUP_CATS;
        for c in 0..CLASS_GROUP_CATS {
            w[ben_base + c] += self.class_separation * self.warmup_lean;
        }
        normalized(w)
    }
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Generate the corpus described by `spec`. Malware traces come first, then
/// benign; family assignment cycles so families stay balanced within a class.
pub fn generate_synthetic_corpus(spec: &CorpusSpec) -> Result<Vec<ProgramTrace>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_malware + spec.n_benign);
    for idx in 0..spec.n_malware + spec.n_benign {
        let (label, class_idx, prefix) = if idx < spec.n_malware {
            (Label::Malware, idx, "m")
        } else {
            (Label::Benign, idx - spec.n_malware, "b")
        };
        let family = class_idx % spec.n_families;
        let mean = spec.family_mean(label, family);
        let mut rng = rng_from(spec.seed, "trace", idx as u64);

        let (lo, hi) = spec.windows_per_program_range;
        let n_windows = rng.gen_range(lo..=hi);
        let q = sample_dirichlet(&mut rng, &mean, spec.concentration);
        // Single-window programs skip the warmup; a lone window has to carry
        // the program's own behavior or the trace would be all startup code.
        let q_warm = if n_windows >= 2 {
            Some(sample_dirichlet(&mut rng, &spec.warmup_mean(), spec.concentration))
        } else {
            None
        };

        let mut windows = Vec::with_capacity(n_windows);
        for i in 0..n_windows {
            let dist = match (i, &q_warm) {
                (0, Some(qw)) => qw,
                _ => &q,
            };
            let counts = sample_multinomial(&mut rng, spec.counts_per_window, dist);
            let total: u64 = counts.iter().sum();
            windows.push(TraceWindow {
                counts,
                basic_blocks: (total / spec.block_divisor).max(1),
            });
        }

        let fam_prefix = match label {
            Label::Malware => "mal",
            Label::Benign => "ben",
        };
        out.push(ProgramTrace {
            program_id: format!("{prefix}{idx:05}"),
            label,
            family: format!("{fam_prefix}{family}"),
            windows,
        });
    }
    Ok(out)
}

fn sample_dirichlet(rng: &mut ChaCha8Rng, mean: &[f64], concentration: f64) -> Vec<f64> {
    let mut q: Vec<f64> = mean
        .iter()
        .map(|&m| {
            let shape = (m * concentration).max(1e-9);
            Gamma::new(shape, 1.0).expect("valid gamma shape").sample(rng)
        })
        .collect();
    let sum: f64 = q.iter().sum();
    if sum <= 0.0 {
        // Degenerate draw (possible only at absurdly small concentrations):
        // fall back to the mean itself.
        q.copy_from_slice(mean);
    } else {
        for v in q.iter_mut() {
            *v /= sum;
        }
    }
    q
}

/// Multinomial via the conditional-binomial decomposition; exact total.
fn sample_multinomial(rng: &mut ChaCha8Rng, total: u64, q: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; q.len()];
    let mut remaining = total;
    let mut rest = 1.0f64;
    for (c, &p) in q.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if c == q.len() - 1 {
            counts[c] = remaining;
            break;
        }
        let cond = if rest > 0.0 { (p / rest).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, cond)
            .expect("clamped probability is valid")
            .sample(rng);
        counts[c] = draw;
        remaining -= draw;
        rest -= p;
    }
    counts
}

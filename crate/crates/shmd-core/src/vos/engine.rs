//! Quantized inference and stochastic fault injection.
//!
//! The detector runs as integer arithmetic in the configured fixed-point
//! format: weights and activations are Q16.16 by default, products carry
//! twice the fractional scale, and each layer accumulates in 64 bits. A
//! fault model corrupts individual multiplier outputs the way overscaled
//! supply voltage does in hardware: with probability `fault_rate` per
//! multiplication, one bit of the product's 32-bit fractional tail is
//! inverted before accumulation. Timing violations surface in the late
//! carry-chain columns of an array multiplier, which is exactly the low
//! half of the double-width product, so a single flip perturbs the
//! product by at most one half in value terms and accuracy degrades
//! gracefully rather than catastrophically.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use super::FixedPointFormat;
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::model::{quantize, MlpModel};
use crate::scalar::{logistic, Scalar};
use crate::seeds::rng_from;

/// How a corrupted multiplier output picks the bit to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Every bit of the product's low 32 bits is equally likely.
    UniformBitFlip,
    /// Bit k is chosen with probability proportional to 2^(k/8): longer
    /// carry chains miss timing first, so high bits fail more often.
    MsbWeightedBitFlip,
    /// Faults disabled regardless of rate.
    None,
}

/// Stochastic fault policy for one inference engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultModel {
    /// Probability that any given multiplier output latches corrupted.
    pub fault_rate: f64,
    pub error_mode: ErrorMode,
    /// Base seed for the engine's fault streams.
    pub rng_seed: u64,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            fault_rate: 0.0,
            error_mode: ErrorMode::UniformBitFlip,
            rng_seed: 0,
        }
    }
}

impl FaultModel {
    pub fn validate(&self) -> Result<()> {
        if !self.fault_rate.is_finite() || !(0.0..=1.0).contains(&self.fault_rate) {
            return Err(Error::Config(format!(
                "fault_rate must lie in [0, 1], got {}",
                self.fault_rate
            )));
        }
        Ok(())
    }

    /// True when this model can never corrupt anything.
    pub fn is_inert(&self) -> bool {
        self.fault_rate == 0.0 || self.error_mode == ErrorMode::None
    }

    #[inline]
    fn strikes(&self, rng: &mut ChaCha8Rng) -> bool {
        if self.error_mode == ErrorMode::None {
            return false;
        }
        if self.fault_rate >= 1.0 {
            return true;
        }
        // One uniform u64 per Bernoulli draw; the threshold conversion is
        // exact to within 2^-53 relative, far below any tolerance here.
        let threshold = (self.fault_rate * 18_446_744_073_709_551_616.0) as u64;
        rng.next_u64() < threshold
    }
}

impl ErrorMode {
    #[inline]
    fn sample_bit(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            ErrorMode::UniformBitFlip => rng.next_u32() & 31,
            ErrorMode::MsbWeightedBitFlip => {
                let cum = msb_cumulative();
                let r = rng.gen_range(0..cum[31]);
                let mut k = 0;
                while cum[k] <= r {
                    k += 1;
                }
                k as u32
            }
            ErrorMode::None => unreachable!("ErrorMode::None never samples a bit"),
        }
    }
}

/// Cumulative integer weights for the MSB-leaning distribution, scaled by
/// 2^32 so the u64 range sampling stays exact.
fn msb_cumulative() -> &'static [u64; 32] {
    static TABLE: OnceLock<[u64; 32]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut cum = [0u64; 32];
        let mut total = 0u64;
        for (k, slot) in cum.iter_mut().enumerate() {
            total += ((k as f64 / 8.0).exp2() * 4_294_967_296.0) as u64;
            *slot = total;
        }
        cum
    })
}

/// Operation counters carried alongside every inference result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacStats {
    /// Multiply-accumulate operations performed.
    pub macs: u64,
    /// MACs whose product was corrupted.
    pub faults: u64,
    /// Accumulator or activation saturations (clamped, never wrapped).
    pub saturations: u64,
}

impl MacStats {
    pub fn absorb(&mut self, other: MacStats) {
        self.macs += other.macs;
        self.faults += other.faults;
        self.saturations += other.saturations;
    }
}

/// Result of one fixed-point forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOutput {
    /// Malware score, logistic of the logit.
    pub score: f64,
    /// Output accumulator read at its native double-fractional scale.
    pub logit: f64,
    pub stats: MacStats,
}

#[inline]
fn acc_add(acc: i64, p: i64, saturations: &mut u64) -> i64 {
    match acc.checked_add(p) {
        Some(v) => v,
        Option::None => {
            *saturations += 1;
            if p > 0 {
                i64::MAX
            } else {
                i64::MIN
            }
        }
    }
}

/// One multiply-accumulate through the fault model: the exact product is
/// computed, corrupted with probability `fault_rate` by inverting one bit
/// of its low 32 bits per the error mode, then added to the accumulator.
/// Overflow saturates and bumps the counter instead of wrapping.
pub fn faulty_mac(
    a: i32,
    b: i32,
    acc: i64,
    fault: &FaultModel,
    rng: &mut ChaCha8Rng,
    stats: &mut MacStats,
) -> i64 {
    let mut p = a as i64 * b as i64;
    stats.macs += 1;
    if fault.strikes(rng) {
        p ^= 1i64 << fault.error_mode.sample_bit(rng);
        stats.faults += 1;
    }
    acc_add(acc, p, &mut stats.saturations)
}

/// The detector's weights rounded onto the fixed-point grid, as integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMlp {
    n_inputs: usize,
    n_hidden: usize,
    w1: Vec<i32>,
    b1: Vec<i32>,
    w2: Vec<i32>,
    b2: i32,
    format: FixedPointFormat,
}

impl QuantizedMlp {
    /// Quantizes the model (erroring on out-of-range weights) and converts
    /// every weight to its raw integer representation.
    pub fn from_model<F: Scalar>(model: &MlpModel<F>) -> Result<QuantizedMlp> {
        model.fixed_point.validate()?;
        let q = quantize(model)?;
        let f = q.fixed_point;
        // Grid points convert exactly; quantize() already range-checked.
        let raw = |v: &F| f.checked_raw(v.to_f64_lossy()).expect("quantized weight in range");
        Ok(QuantizedMlp {
            n_inputs: q.n_inputs,
            n_hidden: q.n_hidden,
            w1: q.w1.iter().map(raw).collect(),
            b1: q.b1.iter().map(raw).collect(),
            w2: q.w2.iter().map(raw).collect(),
            b2: raw(&q.b2),
            format: f,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    /// Converts a feature vector to raw fixed-point inputs, checking arity
    /// and the [0, 1] range.
    pub fn quantize_input<F: Scalar>(&self, x: &[F]) -> Result<Vec<i32>> {
        if x.len() != self.n_inputs {
            return Err(Error::Dimension(format!(
                "input has {} entries, model takes {}",
                x.len(),
                self.n_inputs
            )));
        }
        x.iter()
            .map(|v| {
                let v = v.to_f64_lossy();
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!(
                        "feature value {v} outside [0, 1]"
                    )));
                }
                Ok(self.format.checked_raw(v).expect("unit interval fits"))
            })
            .collect()
    }

    /// Clean fixed-point forward pass over raw inputs. Raw inputs are
    /// trusted as-is (hardware registers hold any pattern); only arity is
    /// checked. Hidden activations narrow back to the value width with
    /// saturation; the output logit is read from the full accumulator.
    pub fn fixed_forward(&self, x: &[i32]) -> Result<InferenceOutput> {
        self.check_arity(x)?;
        let frac = self.format.fractional_bits;
        let mut stats = MacStats::default();
        let mut z1 = vec![0i32; self.n_hidden];
        for j in 0..self.n_hidden {
            let mut acc = (self.b1[j] as i64) << frac;
            let row = &self.w1[j * self.n_inputs..(j + 1) * self.n_inputs];
            for (w, xi) in row.iter().zip(x) {
                stats.macs += 1;
                acc = acc_add(acc, *w as i64 * *xi as i64, &mut stats.saturations);
            }
            z1[j] = narrow_relu(acc, frac, &mut stats.saturations);
        }
        let mut acc2 = (self.b2 as i64) << frac;
        for (w, zj) in self.w2.iter().zip(&z1) {
            stats.macs += 1;
            acc2 = acc_add(acc2, *w as i64 * *zj as i64, &mut stats.saturations);
        }
        Ok(self.finish(acc2, stats))
    }

    fn check_arity(&self, x: &[i32]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::Dimension(format!(
                "input has {} entries, model takes {}",
                x.len(),
                self.n_inputs
            )));
        }
        Ok(())
    }

    fn finish(&self, acc2: i64, stats: MacStats) -> InferenceOutput {
        let double_scale = self.format.scale() * self.format.scale();
        let logit = acc2 as f64 / double_scale;
        InferenceOutput {
            score: logistic(logit),
            logit,
            stats,
        }
    }
}

/// Narrow a double-fractional accumulator to one value-width activation
/// (truncating shift, then saturate) and apply ReLU.
#[inline]
fn narrow_relu(acc: i64, frac: u32, saturations: &mut u64) -> i32 {
    let t = acc >> frac;
    let v = if t > i32::MAX as i64 {
        *saturations += 1;
        i32::MAX
    } else if t < i32::MIN as i64 {
        *saturations += 1;
        i32::MIN
    } else {
        t as i32
    };
    v.max(0)
}

/// A quantized detector paired with a fault policy. Every stochastic pass
/// is a pure function of (model, fault model, stream state, input), so
/// runs replay exactly from their seeds.
#[derive(Debug, Clone)]
pub struct StochasticEngine {
    mlp: QuantizedMlp,
    fault: FaultModel,
}

impl StochasticEngine {
    pub fn new(mlp: QuantizedMlp, fault: FaultModel) -> Result<StochasticEngine> {
        fault.validate()?;
        Ok(StochasticEngine { mlp, fault })
    }

    pub fn mlp(&self) -> &QuantizedMlp {
        &self.mlp
    }

    pub fn fault(&self) -> &FaultModel {
        &self.fault
    }

    /// Stochastic forward pass: identical to the clean pass but every
    /// multiplication goes through `faulty_mac`. An inert fault model
    /// takes the clean path without consuming any randomness, so rate 0
    /// is bit-exact with deterministic fixed-point inference.
    pub fn predict_stochastic(
        &self,
        x: &[i32],
        rng: &mut ChaCha8Rng,
    ) -> Result<InferenceOutput> {
        if self.fault.is_inert() {
            return self.mlp.fixed_forward(x);
        }
        let m = &self.mlp;
        m.check_arity(x)?;
        let frac = m.format.fractional_bits;
        let mut stats = MacStats::default();
        let mut z1 = vec![0i32; m.n_hidden];
        for j in 0..m.n_hidden {
            let mut acc = (m.b1[j] as i64) << frac;
            let row = &m.w1[j * m.n_inputs..(j + 1) * m.n_inputs];
            for (w, xi) in row.iter().zip(x) {
                acc = faulty_mac(*w, *xi, acc, &self.fault, rng, &mut stats);
            }
            z1[j] = narrow_relu(acc, frac, &mut stats.saturations);
        }
        let mut acc2 = (m.b2 as i64) << frac;
        for (w, zj) in m.w2.iter().zip(&z1) {
            acc2 = faulty_mac(*w, *zj, acc2, &self.fault, rng, &mut stats);
        }
        Ok(m.finish(acc2, stats))
    }

    /// Label matrix of independently seeded stochastic passes: one row per
    /// engine instance, one column per input. Row k's stream derives from
    /// the fault model's seed and k alone, so any row reproduces on its
    /// own.
    pub fn sample_instance_outputs(
        &self,
        inputs: &[Vec<i32>],
        n_instances: usize,
        threshold: f64,
    ) -> Result<Vec<Vec<Label>>> {
        if n_instances < 2 {
            return Err(Error::Config(format!(
                "need at least 2 instances, got {n_instances}"
            )));
        }
        (0..n_instances)
            .map(|k| {
                let mut rng = rng_from(self.fault.rng_seed, "instance", k as u64);
                inputs
                    .iter()
                    .map(|x| {
                        let out = self.predict_stochastic(x, &mut rng)?;
                        Ok(if out.score >= threshold {
                            Label::Malware
                        } else {
                            Label::Benign
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

//! Rounding weights onto the fixed-point grid.

use super::MlpModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How many offending weights a range error spells out before truncating.
const MAX_LISTED_OFFENDERS: usize = 8;

/// Round every weight to the nearest point of the model's fixed-point grid
/// (ties away from zero), returning the same architecture with grid-aligned
/// weights. Quantizing twice is a no-op; weights outside the representable
/// range produce an error naming the offenders.
///
/// Grid points are `raw / 2^fractional_bits` with `raw` an i32, so they are
/// exact in f64 (and in f32 for the weight magnitudes this pipeline sees).
pub fn quantize<F: Scalar>(model: &MlpModel<F>) -> Result<MlpModel<F>> {
    model.validate()?;
    let frac = model.fixed_point.fractional_bits;
    let scale = (1u64 << frac) as f64;
    let mut offenders = Vec::new();
    let mut count = 0usize;

    let mut snap = |name: String, v: F| -> F {
        let raw = (v.to_f64_lossy() * scale).round();
        if raw < i32::MIN as f64 || raw > i32::MAX as f64 {
            count += 1;
            if offenders.len() < MAX_LISTED_OFFENDERS {
                offenders.push(format!("{name}={}", v.to_f64_lossy()));
            }
            return v;
        }
        F::from_f64_lossy(raw / scale)
    };

    let n = model.n_inputs;
    let mut out = model.clone();
    for j in 0..model.n_hidden {
        for i in 0..n {
            out.w1[j * n + i] = snap(format!("w1[{j}][{i}]"), model.w1[j * n + i]);
        }
    }
    for (j, b) in model.b1.iter().enumerate() {
        out.b1[j] = snap(format!("b1[{j}]"), *b);
    }
    for (j, w) in model.w2.iter().enumerate() {
        out.w2[j] = snap(format!("w2[{j}]"), *w);
    }
    out.b2 = snap("b2".into(), model.b2);

    if count > 0 {
        let limit = (i32::MAX as f64 + 1.0) / scale;
        return Err(Error::QuantizeRange {
            count,
            limit,
            offenders,
        });
    }
    Ok(out)
}

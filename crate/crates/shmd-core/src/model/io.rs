//! Model files: one JSON object holding dims, activations, the fixed-point
//! format, the training seed and row-major weight arrays.
//!
//! Weights are stored as f64. JSON emission uses the shortest round-trip
//! decimal form, so save → load reproduces every weight bit-for-bit; for
//! quantized models the stored values are exact grid points to begin with.

use super::{HiddenActivation, MlpModel, OutputActivation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vos::FixedPointFormat;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelFile {
    format_version: u32,
    n_inputs: usize,
    n_hidden: usize,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
    fixed_point: FixedPointFormat,
    train_seed: u64,
    /// Row-major, one row per hidden unit.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

pub(crate) fn encode_model<F: Scalar>(model: &MlpModel<F>) -> Result<ModelFile> {
    model.validate()?;
    Ok(ModelFile {
        format_version: FORMAT_VERSION,
        n_inputs: model.n_inputs,
        n_hidden: model.n_hidden,
        hidden_activation: model.hidden_activation,
        output_activation: model.output_activation,
        fixed_point: model.fixed_point,
        train_seed: model.train_seed,
        w1: model.w1.iter().map(|v| v.to_f64_lossy()).collect(),
        b1: model.b1.iter().map(|v| v.to_f64_lossy()).collect(),
        w2: model.w2.iter().map(|v| v.to_f64_lossy()).collect(),
        b2: model.b2.to_f64_lossy(),
    })
}

pub(crate) fn decode_model<F: Scalar>(file: ModelFile) -> Result<MlpModel<F>> {
    if file.format_version != FORMAT_VERSION {
        return Err(Error::ModelFile(format!(
            "unsupported format_version {}, this build reads {FORMAT_VERSION}",
            file.format_version
        )));
    }
    let model = MlpModel {
        n_inputs: file.n_inputs,
        n_hidden: file.n_hidden,
        w1: file.w1.iter().map(|&v| F::from_f64_lossy(v)).collect(),
        b1: file.b1.iter().map(|&v| F::from_f64_lossy(v)).collect(),
        w2: file.w2.iter().map(|&v| F::from_f64_lossy(v)).collect(),
        b2: F::from_f64_lossy(file.b2),
        hidden_activation: file.hidden_activation,
        output_activation: file.output_activation,
        fixed_point: file.fixed_point,
        train_seed: file.train_seed,
    };
    model.validate().map_err(|e| Error::ModelFile(e.to_string()))?;
    Ok(model)
}

pub fn save_model<F: Scalar>(model: &MlpModel<F>, path: &Path) -> Result<()> {
    let file = encode_model(model)?;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    Ok(())
}

pub fn load_model<F: Scalar>(path: &Path) -> Result<MlpModel<F>> {
    let r = BufReader::new(File::open(path)?);
    let file: ModelFile =
        serde_json::from_reader(r).map_err(|e| Error::ModelFile(e.to_string()))?;
    decode_model(file)
}

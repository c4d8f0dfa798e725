//! The detector model: a single-hidden-layer MLP with ReLU hidden units and
//! a logistic output, matching the shape that fits on detector hardware.
//!
//! Submodules: [`train`] (seeded minibatch SGD on binary cross-entropy),
//! [`quantize`] (rounding weights onto the fixed-point grid), [`io`] (model
//! files).

mod io;
mod quantize;
mod train;

pub use io::{load_model, save_model};
pub(crate) use io::{decode_model, encode_model, ModelFile};
pub use quantize::quantize;
pub use train::{train, TrainConfig};
pub(crate) use train::train_unweighted;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};
use crate::vos::FixedPointFormat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Logistic,
}

/// Feed-forward detector: `score = logistic(w2 . relu(w1 x + b1) + b2)`.
///
/// `w1` is row-major with one row per hidden unit (`w1[j * n_inputs + i]` is
/// the weight from input `i` into hidden unit `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F> {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub w1: Vec<F>,
    pub b1: Vec<F>,
    pub w2: Vec<F>,
    pub b2: F,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub fixed_point: FixedPointFormat,
    pub train_seed: u64,
}

impl<F: Scalar> MlpModel<F> {
    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_hidden == 0 {
            return Err(Error::Dimension("model dimensions must be positive".into()));
        }
        if self.w1.len() != self.n_hidden * self.n_inputs
            || self.b1.len() != self.n_hidden
            || self.w2.len() != self.n_hidden
        {
            return Err(Error::Dimension(format!(
                "weight shapes ({}, {}, {}) do not match dims {}x{}",
                self.w1.len(),
                self.b1.len(),
                self.w2.len(),
                self.n_hidden,
                self.n_inputs
            )));
        }
        let finite = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(std::iter::once(&self.b2))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("model contains non-finite weights".into()));
        }
        self.fixed_point.validate()?;
        Ok(())
    }

    fn check_input(&self, x: &[F]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_inputs
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations `w1 x + b1`.
    fn hidden_pre(&self, x: &[F]) -> Vec<F> {
        let mut z1 = self.b1.clone();
        for j in 0..self.n_hidden {
            let row = &self.w1[j * self.n_inputs..(j + 1) * self.n_inputs];
            let mut acc = F::zero();
            for (w, v) in row.iter().zip(x) {
                acc = acc + *w * *v;
            }
            z1[j] = z1[j] + acc;
        }
        z1
    }

    /// Output pre-activation and hidden pre-activations for `x`.
    pub(crate) fn forward_parts(&self, x: &[F]) -> (F, Vec<F>) {
        let z1 = self.hidden_pre(x);
        let mut z = self.b2;
        for (w, pre) in self.w2.iter().zip(&z1) {
            if *pre > F::zero() {
                z = z + *w * *pre;
            }
        }
        (z, z1)
    }

    /// Malware score in [0, 1]. Accepts any `n_inputs`-long slice so callers
    /// may probe points off the frequency simplex (finite differences,
    /// injection what-ifs); windows should go through
    /// [`crate::dataset::TraceWindow::features`].
    pub fn predict(&self, x: &[F]) -> Result<F> {
        self.check_input(x)?;
        let (z, _) = self.forward_parts(x);
        Ok(logistic(z))
    }

    pub fn label(&self, x: &[F], threshold: F) -> Result<Label> {
        Ok(if self.predict(x)? >= threshold {
            Label::Malware
        } else {
            Label::Benign
        })
    }

    /// Exact gradient of the binary cross-entropy loss with respect to the
    /// input, for `target` encoded as malware = 1, benign = 0:
    /// `dL/dx_i = (score - y) * sum_j w2_j * [z1_j > 0] * w1[j][i]`.
    ///
    /// The ReLU subgradient at exactly zero is taken as zero.
    pub fn gradient_wrt_input(&self, x: &[F], target: Label) -> Result<Vec<F>> {
        self.check_input(x)?;
        let (z, z1) = self.forward_parts(x);
        let y = match target {
            Label::Malware => F::one(),
            Label::Benign => F::zero(),
        };
        let dz = logistic(z) - y;
        Ok(self.backprop_input(dz, &z1))
    }

    /// Gradient of the malware score itself (not the loss):
    /// `ds/dx_i = s(1-s) * sum_j w2_j * [z1_j > 0] * w1[j][i]`.
    pub fn score_gradient(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_input(x)?;
        let (z, z1) = self.forward_parts(x);
        let s = logistic(z);
        Ok(self.backprop_input(s * (F::one() - s), &z1))
    }

    fn backprop_input(&self, dz: F, z1: &[F]) -> Vec<F> {
        let mut g = vec![F::zero(); self.n_inputs];
        for j in 0..self.n_hidden {
            if z1[j] > F::zero() {
                let scale = dz * self.w2[j];
                let row = &self.w1[j * self.n_inputs..(j + 1) * self.n_inputs];
                for (gi, w) in g.iter_mut().zip(row) {
                    *gi = *gi + scale * *w;
                }
            }
        }
        g
    }

    /// Binary cross-entropy of one example, clamped away from log(0).
    pub(crate) fn bce(&self, score: F, target: Label) -> F {
        let eps = F::from_f64_lossy(1e-12);
        let s = score.max(eps).min(F::one() - eps);
        match target {
            Label::Malware => -s.ln(),
            Label::Benign => -(F::one() - s).ln(),
        }
    }
}

//! The attacker's only view of the victim: a query surface that takes a
//! feature vector or a trace and returns a label. No scores, weights, or
//! internals cross this boundary, which is what makes the reverse
//! engineering below genuinely black-box.

use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, ProgramTrace};
use crate::error::Result;
use crate::model::MlpModel;
use crate::scalar::Scalar;
use crate::seeds::rng_from;
use crate::vos::{RandomizedEnsemble, StochasticEngine};

/// Majority vote over window labels; ties flag malware (fail-closed).
pub fn majority_label(labels: impl IntoIterator<Item = Label>) -> Label {
    let mut mal = 0i64;
    let mut ben = 0i64;
    for l in labels {
        match l {
            Label::Malware => mal += 1,
            Label::Benign => ben += 1,
        }
    }
    if mal >= ben {
        Label::Malware
    } else {
        Label::Benign
    }
}

/// Black-box detector interface. Implementations may be stateful (a
/// stochastic victim advances its fault stream on every query), so both
/// methods take `&mut self`.
pub trait DetectorOracle<F: Scalar> {
    /// Label one detection window.
    fn label_window(&mut self, x: &[F]) -> Result<Label>;

    /// Label a whole program: one query per window, majority vote, ties
    /// fail closed to malware.
    fn label_trace(&mut self, trace: &ProgramTrace) -> Result<Label> {
        let mut labels = Vec::with_capacity(trace.windows.len());
        for w in &trace.windows {
            let x = w.features::<F>();
            labels.push(self.label_window(&x)?);
        }
        Ok(majority_label(labels))
    }
}

/// Label every trace with one oracle query each (the attacker's realistic
/// single-observation view of a stochastic victim). Returned labels align
/// with the input order.
pub fn label_with_oracle<F: Scalar, O: DetectorOracle<F> + ?Sized>(
    oracle: &mut O,
    traces: &[ProgramTrace],
) -> Result<Vec<Label>> {
    traces.iter().map(|t| oracle.label_trace(t)).collect()
}

/// The clean float-path detector behind the oracle interface.
pub struct DeterministicOracle<'a, F: Scalar> {
    model: &'a MlpModel<F>,
    threshold: F,
}

impl<'a, F: Scalar> DeterministicOracle<'a, F> {
    pub fn new(model: &'a MlpModel<F>, threshold: F) -> Result<Self> {
        model.validate()?;
        Ok(DeterministicOracle { model, threshold })
    }
}

impl<F: Scalar> DetectorOracle<F> for DeterministicOracle<'_, F> {
    fn label_window(&mut self, x: &[F]) -> Result<Label> {
        self.model.label(x, self.threshold)
    }
}

/// A fault-injected victim. Each query advances one private fault stream
/// derived from the engine's fault seed, so a full query sequence replays
/// exactly from the configuration.
pub struct StochasticOracle {
    engine: StochasticEngine,
    rng: ChaCha8Rng,
    threshold: f64,
}

impl StochasticOracle {
    pub fn new(engine: StochasticEngine, threshold: f64) -> StochasticOracle {
        let rng = rng_from(engine.fault().rng_seed, "oracle-stream", 0);
        StochasticOracle {
            engine,
            rng,
            threshold,
        }
    }

    pub fn engine(&self) -> &StochasticEngine {
        &self.engine
    }
}

impl<F: Scalar> DetectorOracle<F> for StochasticOracle {
    fn label_window(&mut self, x: &[F]) -> Result<Label> {
        let raw = self.engine.mlp().quantize_input(x)?;
        let out = self.engine.predict_stochastic(&raw, &mut self.rng)?;
        Ok(if out.score >= self.threshold {
            Label::Malware
        } else {
            Label::Benign
        })
    }
}

/// The randomized-ensemble defense behind the oracle interface.
pub struct EnsembleOracle {
    ensemble: RandomizedEnsemble,
    rng: ChaCha8Rng,
    threshold: f64,
}

impl EnsembleOracle {
    pub fn new(ensemble: RandomizedEnsemble, selector_seed: u64, threshold: f64) -> Self {
        EnsembleOracle {
            ensemble,
            rng: rng_from(selector_seed, "ensemble-select", 0),
            threshold,
        }
    }
}

impl<F: Scalar> DetectorOracle<F> for EnsembleOracle {
    fn label_window(&mut self, x: &[F]) -> Result<Label> {
        let raw = self.ensemble.members()[0].quantize_input(x)?;
        let (_, out) = self.ensemble.ensemble_predict(&raw, &mut self.rng)?;
        Ok(if out.score >= self.threshold {
            Label::Malware
        } else {
            Label::Benign
        })
    }
}

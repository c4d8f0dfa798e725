//! Randomized-ensemble baseline defense: several independently trained
//! detectors, with every query answered by one member picked uniformly at
//! random. Unlike the fault-injected engine, each member's prediction is
//! deterministic; all stochasticity lives in the selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::engine::{InferenceOutput, QuantizedMlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RandomizedEnsemble {
    members: Vec<QuantizedMlp>,
}

impl RandomizedEnsemble {
    pub fn new(members: Vec<QuantizedMlp>) -> Result<RandomizedEnsemble> {
        if members.len() < 2 {
            return Err(Error::Config(format!(
                "ensemble needs at least 2 members, got {}",
                members.len()
            )));
        }
        let n = members[0].n_inputs();
        if members.iter().any(|m| m.n_inputs() != n) {
            return Err(Error::Dimension(
                "ensemble members disagree on input width".into(),
            ));
        }
        Ok(RandomizedEnsemble { members })
    }

    pub fn members(&self) -> &[QuantizedMlp] {
        &self.members
    }

    /// Answers one query with a uniformly selected member's deterministic
    /// fixed-point prediction. Returns the member index alongside the
    /// output so selection behavior stays auditable.
    pub fn ensemble_predict(
        &self,
        x: &[i32],
        rng: &mut ChaCha8Rng,
    ) -> Result<(usize, InferenceOutput)> {
        let pick = rng.gen_range(0..self.members.len());
        Ok((pick, self.members[pick].fixed_forward(x)?))
    }
}

//! Seeded minibatch SGD on binary cross-entropy.

use super::{HiddenActivation, MlpModel, OutputActivation};
use crate::dataset::{FeatureVector, Label};
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};
use crate::seeds::rng_from;
use crate::vos::FixedPointFormat;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Training hyperparameters. Two runs with equal data and config produce
/// bit-identical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig<F> {
    pub epochs: usize,
    pub learning_rate: F,
    pub batch_size: usize,
    pub seed: u64,
    /// Decision threshold on the malware score, in (0, 1).
    pub threshold: F,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: F::from_f64_lossy(0.15),
            batch_size: 32,
            seed: 7,
            threshold: F::from_f64_lossy(0.5),
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let lr = self.learning_rate.to_f64_lossy();
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::Config(format!("learning_rate must be positive, got {lr}")));
        }
        let t = self.threshold.to_f64_lossy();
        if !(0.0..1.0).contains(&t) || t == 0.0 {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {t}")));
        }
        Ok(())
    }
}

/// Train a detector on per-window examples. The hidden layer is as wide as
/// the input. Fails on empty or single-class data, and reports the epoch if
/// the loss ever leaves the reals.
///
/// The loss reweights classes to equal total mass. Malware corpora are
/// habitually lopsided, and an unweighted fit on such data spends most of its
/// capacity learning the class prior; ambiguous windows would then inherit a
/// confident malware score instead of a near-threshold one. Balancing keeps
/// the operating point driven by feature evidence.
pub fn train<F: Scalar>(
    data: &[(FeatureVector<F>, Label)],
    cfg: &TrainConfig<F>,
) -> Result<MlpModel<F>> {
    train_impl(data, cfg, true)
}

/// [`train`] without the class reweighting. A model imitating another one
/// has to reproduce its answers at the observed label mix, so there the
/// prior is part of the signal rather than a nuisance to cancel.
pub(crate) fn train_unweighted<F: Scalar>(
    data: &[(FeatureVector<F>, Label)],
    cfg: &TrainConfig<F>,
) -> Result<MlpModel<F>> {
    train_impl(data, cfg, false)
}

fn train_impl<F: Scalar>(
    data: &[(FeatureVector<F>, Label)],
    cfg: &TrainConfig<F>,
    class_balance: bool,
) -> Result<MlpModel<F>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let n_mal = data.iter().filter(|(_, l)| *l == Label::Malware).count();
    if n_mal == 0 {
        return Err(Error::SingleClassData(Label::Benign));
    }
    if n_mal == data.len() {
        return Err(Error::SingleClassData(Label::Malware));
    }
    let class_weight = {
        let (wm, wb) = if class_balance {
            let half = F::from_f64_lossy(data.len() as f64 / 2.0);
            (
                half / F::from_f64_lossy(n_mal as f64),
                half / F::from_f64_lossy((data.len() - n_mal) as f64),
            )
        } else {
            (F::one(), F::one())
        };
        move |label: Label| match label {
            Label::Malware => wm,
            Label::Benign => wb,
        }
    };

    let n_inputs = data[0].0.len();
    let n_hidden = n_inputs;
    let mut model = init_model(n_inputs, n_hidden, cfg.seed);

    let mut idx: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate;

    // Gradient accumulators reused across batches.
    let mut gw1 = vec![F::zero(); n_hidden * n_inputs];
    let mut gb1 = vec![F::zero(); n_hidden];
    let mut gw2 = vec![F::zero(); n_hidden];

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng_from(cfg.seed, "mlp-shuffle", epoch as u64);
        idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;

        for batch in idx.chunks(cfg.batch_size) {
            gw1.iter_mut().for_each(|v| *v = F::zero());
            gb1.iter_mut().for_each(|v| *v = F::zero());
            gw2.iter_mut().for_each(|v| *v = F::zero());
            let mut gb2 = F::zero();

            for &k in batch {
                let (x, label) = &data[k];
                let (z, z1) = model.forward_parts(x);
                if !z.is_finite() {
                    // The BCE clamp below would hide a NaN score, so divergence
                    // is caught on the raw pre-activation.
                    return Err(Error::TrainingDiverged {
                        epoch,
                        loss: z.to_f64_lossy(),
                    });
                }
                let s = logistic(z);
                let cw = class_weight(*label);
                epoch_loss += (cw * model.bce(s, *label)).to_f64_lossy();
                let y = match label {
                    Label::Malware => F::one(),
                    Label::Benign => F::zero(),
                };
                let dz = cw * (s - y);
                gb2 = gb2 + dz;
                for j in 0..n_hidden {
                    if z1[j] > F::zero() {
                        gw2[j] = gw2[j] + dz * z1[j];
                        let dz1 = dz * model.w2[j];
                        gb1[j] = gb1[j] + dz1;
                        let grow = &mut gw1[j * n_inputs..(j + 1) * n_inputs];
                        for (g, xv) in grow.iter_mut().zip(x.iter()) {
                            *g = *g + dz1 * *xv;
                        }
                    }
                }
            }

            let step = lr / F::from_f64_lossy(batch.len() as f64);
            for (w, g) in model.w1.iter_mut().zip(&gw1) {
                *w = *w - step * *g;
            }
            for (b, g) in model.b1.iter_mut().zip(&gb1) {
                *b = *b - step * *g;
            }
            for (w, g) in model.w2.iter_mut().zip(&gw2) {
                *w = *w - step * *g;
            }
            model.b2 = model.b2 - step * gb2;
        }

        // Dead hidden units squash a NaN pre-activation to zero, which can
        // leave the loss looking healthy while the weights are already
        // non-finite, so the weights are checked directly too.
        let weights_ok = model.w1.iter().chain(&model.b1).chain(&model.w2).all(|w| w.is_finite())
            && model.b2.is_finite();
        if !epoch_loss.is_finite() || !weights_ok {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: epoch_loss,
            });
        }
    }

    model.train_seed = cfg.seed;
    Ok(model)
}

fn init_model<F: Scalar>(n_inputs: usize, n_hidden: usize, seed: u64) -> MlpModel<F> {
    let mut rng = rng_from(seed, "mlp-init", 0);
    // Inputs are frequency vectors summing to one, so each entry sits near
    // 1/n and sum(x^2) is about 1/n. A plain Xavier bound would leave the
    // hidden pre-activations dominated by their biases and the first layer
    // nearly untrainable at these input scales, so the bound compensates to
    // give unit-variance pre-activations: Var(w.x) = (a^2/3) sum(x^2) = 1
    // at a = sqrt(3 n). Biases then spread the ReLU thresholds.
    let a1 = (3.0 * n_inputs as f64).sqrt();
    let a2 = (6.0 / (n_hidden + 1) as f64).sqrt();
    let mut draw = |bound: f64| F::from_f64_lossy(rng.gen_range(-bound..bound));
    let w1 = (0..n_hidden * n_inputs).map(|_| draw(a1)).collect();
    let b1 = (0..n_hidden).map(|_| draw(0.5)).collect();
    let w2 = (0..n_hidden).map(|_| draw(a2)).collect();
    let b2 = draw(0.1);
    MlpModel {
        n_inputs,
        n_hidden,
        w1,
        b1,
        w2,
        b2,
        hidden_activation: HiddenActivation::Relu,
        output_activation: OutputActivation::Logistic,
        fixed_point: FixedPointFormat::default(),
        train_seed: seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic_corpus, windows_with_labels, CorpusSpec};

    fn toy_data() -> Vec<(FeatureVector<f64>, Label)> {
        let corpus = generate_synthetic_corpus(&CorpusSpec {
            n_malware: 30,
            n_benign: 30,
            n_families: 1,
            windows_per_program_range: (2, 4),
            counts_per_window: 1000,
            seed: 5,
            ..CorpusSpec::default()
        })
        .unwrap();
        windows_with_labels(&corpus)
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_data();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(
            &data,
            &TrainConfig {
                seed: 8,
                epochs: 3,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn training_learns_the_toy_separation() {
        let data = toy_data();
        let cfg = TrainConfig {
            epochs: 12,
            ..TrainConfig::default()
        };
        let m = train(&data, &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(x, l)| m.label(x, cfg.threshold).unwrap() == *l)
            .count();
        let acc = correct as f64 / data.len() as f64;
        assert!(acc >= 0.9, "window accuracy {acc}");
    }

    #[test]
    fn single_class_data_is_refused() {
        let data: Vec<_> = toy_data()
            .into_iter()
            .filter(|(_, l)| *l == Label::Malware)
            .collect();
        match train(&data, &TrainConfig::default()) {
            Err(Error::SingleClassData(Label::Malware)) => {}
            other => panic!("expected single-class error, got {other:?}"),
        }
    }

    #[test]
    fn empty_data_is_refused() {
        let data: Vec<(FeatureVector<f64>, Label)> = Vec::new();
        assert!(matches!(
            train(&data, &TrainConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn divergence_reports_the_epoch() {
        // An absurd learning rate compounds the layer weights past f64 range
        // within the first few batches.
        let data = toy_data();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e160,
            ..TrainConfig::default()
        };
        match train(&data, &cfg) {
            Err(Error::TrainingDiverged { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = TrainConfig::<f64>::default();
        cfg.threshold = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }
}

//! Reverse engineering: query the victim for labels, then fit a proxy
//! model to the labeled windows. Three proxy families are supported: an
//! MLP matching the victim architecture, logistic regression, and a
//! boosted-stump ensemble standing in for non-differentiable proxies.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::oracle::{majority_label, DetectorOracle};
use crate::dataset::{FeatureVector, Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::model::{decode_model, encode_model, train_unweighted, MlpModel, ModelFile, TrainConfig};
use crate::scalar::logistic;
use crate::seeds::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyArchitecture {
    Mlp,
    Logistic,
    Stumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    pub architecture: ProxyArchitecture,
    /// Hyperparameters shared by the gradient-trained architectures; the
    /// seed also drives window subsampling.
    pub train: TrainConfig<f64>,
    /// Query budget: at most this many windows are labeled and fitted.
    pub max_windows: Option<usize>,
    /// Boosting rounds for the stump ensemble.
    pub stump_rounds: usize,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            architecture: ProxyArchitecture::Mlp,
            train: TrainConfig {
                epochs: 12,
                ..TrainConfig::default()
            },
            max_windows: None,
            stump_rounds: 40,
        }
    }
}

/// Logistic regression over frequency features. Inputs are scaled by the
/// feature count internally (entries of a frequency vector sit near 1/n),
/// so the learning rate means the same thing as for O(1) inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub w: Vec<f64>,
    pub b: f64,
    input_scale: f64,
}

impl LogisticModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let z: f64 = self
            .w
            .iter()
            .zip(x)
            .map(|(w, v)| w * v * self.input_scale)
            .sum::<f64>()
            + self.b;
        Ok(logistic(z))
    }

    /// d(score)/dx, accounting for the internal input scaling.
    pub fn score_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.score(x)?;
        Ok(self.w.iter().map(|w| s * (1.0 - s) * w * self.input_scale).collect())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.w.len() {
            return Err(Error::Dimension(format!(
                "input has {} entries, model takes {}",
                x.len(),
                self.w.len()
            )));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn from_weights(w: Vec<f64>, b: f64) -> LogisticModel {
        LogisticModel { w, b, input_scale: 1.0 }
    }
}

fn train_logistic(data: &[(FeatureVector<f64>, Label)], cfg: &TrainConfig<f64>) -> LogisticModel {
    use rand::seq::SliceRandom;
    let n = data[0].0.len();
    let scale = n as f64;
    let mut w = vec![0.0f64; n];
    let mut b = 0.0f64;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let mut gw = vec![0.0f64; n];
    for epoch in 0..cfg.epochs {
        let mut rng = rng_from(cfg.seed, "logit-shuffle", epoch as u64);
        idx.shuffle(&mut rng);
        for batch in idx.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0f64;
            for &k in batch {
                let (x, label) = &data[k];
                let z: f64 =
                    w.iter().zip(x.iter()).map(|(w, v)| w * v * scale).sum::<f64>() + b;
                let s = logistic(z);
                let dz = s - if *label == Label::Malware { 1.0 } else { 0.0 };
                for (g, v) in gw.iter_mut().zip(x.iter()) {
                    *g += dz * v * scale;
                }
                gb += dz;
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= step * g;
            }
            b -= step * gb;
        }
    }
    LogisticModel { w, b, input_scale: scale }
}

/// One axis-aligned decision stump: votes malware when the feature falls
/// on the stump's positive side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// +1 votes malware above the threshold, -1 below it.
    pub polarity: i8,
    pub alpha: f64,
}

impl Stump {
    fn vote(&self, x: &[f64]) -> f64 {
        let above = x[self.feature] > self.threshold;
        if above == (self.polarity > 0) {
            1.0
        } else {
            -1.0
        }
    }
}

/// AdaBoost over decision stumps: the non-differentiable proxy option.
/// Training is fully deterministic (no randomness; ties resolve by fixed
/// scan order), and the score maps the vote margin through the logistic.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpEnsemble {
    pub stumps: Vec<Stump>,
    n_inputs: usize,
}

impl StumpEnsemble {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_inputs {
            return Err(Error::Dimension(format!(
                "input has {} entries, model takes {}",
                x.len(),
                self.n_inputs
            )));
        }
        let margin: f64 = self.stumps.iter().map(|s| s.alpha * s.vote(x)).sum();
        Ok(logistic(margin))
    }
}

fn train_stumps(data: &[(FeatureVector<f64>, Label)], rounds: usize) -> StumpEnsemble {
    let n_inputs = data[0].0.len();
    let n = data.len();
    let y: Vec<f64> = data
        .iter()
        .map(|(_, l)| if *l == Label::Malware { 1.0 } else { -1.0 })
        .collect();
    // Sample indices sorted per feature, computed once.
    let sorted: Vec<Vec<usize>> = (0..n_inputs)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| data[a].0[f].total_cmp(&data[b].0[f]));
            idx
        })
        .collect();

    let mut d = vec![1.0 / n as f64; n];
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        // Best stump by weighted error: walking the sorted samples moves
        // the threshold across each cut in O(1).
        let mut best: Option<(f64, Stump)> = None;
        let pos_mass: f64 = d.iter().zip(&y).filter(|(_, y)| **y > 0.0).map(|(d, _)| d).sum();
        for (f, order) in sorted.iter().enumerate() {
            // Threshold below all samples, polarity +1: everything votes
            // malware, so exactly the negative mass is wrong.
            let mut err_above = 1.0 - pos_mass;
            let mut consider = |err_above: f64, threshold: f64| {
                let (err, polarity) = if err_above <= 0.5 {
                    (err_above, 1i8)
                } else {
                    (1.0 - err_above, -1i8)
                };
                let candidate = Stump { feature: f, threshold, polarity, alpha: 0.0 };
                if best.as_ref().map_or(true, |(e, _)| err < *e) {
                    best = Some((err, candidate));
                }
            };
            for (pos, &i) in order.iter().enumerate() {
                // Moving the cut past sample i flips its vote to benign.
                let v = data[i].0[f];
                err_above += if y[i] > 0.0 { d[i] } else { -d[i] };
                let next = order.get(pos + 1).map(|&j| data[j].0[f]);
                match next {
                    Some(nv) if nv > v => consider(err_above, (v + nv) / 2.0),
                    Option::None => consider(err_above, v + 1e-12),
                    _ => {}
                }
            }
        }
        let (err, mut stump) = match best {
            Some(b) => b,
            Option::None => break,
        };
        if err >= 0.5 - 1e-12 {
            break;
        }
        let e = err.clamp(1e-12, 0.5);
        stump.alpha = 0.5 * ((1.0 - e) / e).ln();
        let mut total = 0.0;
        for i in 0..n {
            d[i] *= (-stump.alpha * y[i] * stump.vote(&data[i].0)).exp();
            total += d[i];
        }
        d.iter_mut().for_each(|w| *w /= total);
        stumps.push(stump);
    }
    StumpEnsemble { stumps, n_inputs }
}

/// A trained stand-in for the victim. The MLP and logistic variants are
/// differentiable; the stump ensemble is not and reports no gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxyModel {
    Mlp(MlpModel<f64>),
    Logistic(LogisticModel),
    Stumps(StumpEnsemble),
}

impl ProxyModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            ProxyModel::Mlp(m) => m.predict(x),
            ProxyModel::Logistic(m) => m.score(x),
            ProxyModel::Stumps(m) => m.score(x),
        }
    }

    /// Analytic d(score)/dx where the architecture has one.
    pub fn score_gradient(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        match self {
            ProxyModel::Mlp(m) => m.score_gradient(x).map(Some),
            ProxyModel::Logistic(m) => m.score_gradient(x).map(Some),
            ProxyModel::Stumps(_) => Ok(Option::None),
        }
    }

    pub fn label(&self, x: &[f64], threshold: f64) -> Result<Label> {
        Ok(if self.score(x)? >= threshold {
            Label::Malware
        } else {
            Label::Benign
        })
    }

    /// Trace-level decision under the same majority rule the oracles use.
    pub fn label_trace(&self, trace: &ProgramTrace, threshold: f64) -> Result<Label> {
        let mut labels = Vec::with_capacity(trace.windows.len());
        for w in &trace.windows {
            let x = w.features::<f64>();
            labels.push(self.label(&x, threshold)?);
        }
        Ok(majority_label(labels))
    }
}

/// On-disk proxy layout: the MLP variant reuses the model file layout,
/// the other architectures store their parameters directly.
#[derive(Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
enum ProxyFile {
    Mlp { model: ModelFile },
    Logistic { weights: Vec<f64>, bias: f64, input_scale: f64 },
    Stumps { n_inputs: usize, stumps: Vec<Stump> },
}

pub fn save_proxy(proxy: &ProxyModel, path: &Path) -> Result<()> {
    let file = match proxy {
        ProxyModel::Mlp(m) => ProxyFile::Mlp { model: encode_model(m)? },
        ProxyModel::Logistic(m) => ProxyFile::Logistic {
            weights: m.w.clone(),
            bias: m.b,
            input_scale: m.input_scale,
        },
        ProxyModel::Stumps(m) => ProxyFile::Stumps {
            n_inputs: m.n_inputs,
            stumps: m.stumps.clone(),
        },
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    Ok(())
}

pub fn load_proxy(path: &Path) -> Result<ProxyModel> {
    let r = BufReader::new(File::open(path)?);
    let file: ProxyFile =
        serde_json::from_reader(r).map_err(|e| Error::ModelFile(e.to_string()))?;
    Ok(match file {
        ProxyFile::Mlp { model } => ProxyModel::Mlp(decode_model(model)?),
        ProxyFile::Logistic { weights, bias, input_scale } => {
            let finite =
                weights.iter().all(|w| w.is_finite()) && bias.is_finite() && input_scale.is_finite();
            if weights.is_empty() || !finite {
                return Err(Error::ModelFile(
                    "logistic proxy parameters must be finite and non-empty".into(),
                ));
            }
            ProxyModel::Logistic(LogisticModel { w: weights, b: bias, input_scale })
        }
        ProxyFile::Stumps { n_inputs, stumps } => {
            let ok = n_inputs > 0
                && stumps
                    .iter()
                    .all(|s| s.feature < n_inputs && s.alpha.is_finite() && s.threshold.is_finite());
            if !ok {
                return Err(Error::ModelFile(
                    "stump proxy features must fit n_inputs with finite cuts".into(),
                ));
            }
            ProxyModel::Stumps(StumpEnsemble { stumps, n_inputs })
        }
    })
}

/// Train a proxy from nothing but oracle answers: every selected window
/// is labeled by one victim query, and the proxy fits those labels. The
/// oracle interface exposes labels only, so this sees no scores or
/// weights.
pub fn reverse_engineer<O: DetectorOracle<f64> + ?Sized>(
    oracle: &mut O,
    attacker_traces: &[ProgramTrace],
    cfg: &ProxyConfig,
) -> Result<ProxyModel> {
    cfg.train.validate()?;
    let windows: Vec<&crate::dataset::TraceWindow> = attacker_traces
        .iter()
        .flat_map(|t| t.windows.iter())
        .collect();
    if windows.is_empty() {
        return Err(Error::EmptyInput(
            "no attacker windows to query the oracle with".into(),
        ));
    }
    let picked: Vec<usize> = match cfg.max_windows {
        Some(m) if m < windows.len() => {
            let mut rng = rng_from(cfg.train.seed, "proxy-sample", 0);
            let mut v = sample(&mut rng, windows.len(), m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..windows.len()).collect(),
    };

    let mut data = Vec::with_capacity(picked.len());
    for i in picked {
        let x = windows[i].features::<f64>();
        let label = oracle.label_window(&x)?;
        data.push((x, label));
    }
    let n_mal = data.iter().filter(|(_, l)| *l == Label::Malware).count();
    if n_mal == 0 {
        return Err(Error::SingleClassData(Label::Benign));
    }
    if n_mal == data.len() {
        return Err(Error::SingleClassData(Label::Malware));
    }

    // No class rebalancing for any architecture: the proxy's job is to agree
    // with the oracle, and the oracle's label mix is part of what it answers.
    Ok(match cfg.architecture {
        ProxyArchitecture::Mlp => ProxyModel::Mlp(train_unweighted(&data, &cfg.train)?),
        ProxyArchitecture::Logistic => ProxyModel::Logistic(train_logistic(&data, &cfg.train)),
        ProxyArchitecture::Stumps => ProxyModel::Stumps(train_stumps(&data, cfg.stump_rounds)),
    })
}

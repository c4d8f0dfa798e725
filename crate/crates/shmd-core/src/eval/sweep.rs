//! The fault-rate sweep: train one victim, then walk the fault grid and
//! measure detection quality, attack resistance, and detection speed at
//! every rate, many repetitions each.

use crate::attack::{
    generate_evasive_set, reverse_engineer, AttackConfig, Scenario, StochasticOracle,
};
use crate::dataset::{windows_with_labels, CorpusSplits, Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion_over_traces, metrics, re_effectiveness, transferability};
use crate::eval::speed::detection_speed;
use crate::model::{train, TrainConfig};
use crate::seeds::derive_seed;
use crate::vos::{ErrorMode, FaultModel, QuantizedMlp, StochasticEngine};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Fault rates to visit, ascending, each in [0, 1].
    pub fault_rates: Vec<f64>,
    pub repetitions: usize,
    pub error_mode: ErrorMode,
    /// Victim training hyperparameters; the threshold also drives every
    /// oracle decision in the sweep.
    pub train: TrainConfig<f64>,
    /// Attack sections (reverse engineering, evasion, transferability)
    /// run only when this is set.
    pub attack: Option<AttackConfig>,
    /// Whether to measure detection speed on the testing malware.
    pub detection_speed: bool,
    /// Root of every fault and proxy seed used in the sweep.
    pub master_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            fault_rates: vec![0.0, 0.1, 0.3, 0.5],
            repetitions: 50,
            error_mode: ErrorMode::UniformBitFlip,
            train: TrainConfig::default(),
            attack: None,
            detection_speed: false,
            master_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fault_rates.is_empty() {
            return Err(Error::Config("sweep needs at least one fault rate".into()));
        }
        for r in &self.fault_rates {
            if !r.is_finite() || !(0.0..=1.0).contains(r) {
                return Err(Error::Config(format!("fault rate {r} is outside [0, 1]")));
            }
        }
        if self.fault_rates.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config(
                "fault rates must be strictly ascending".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        self.train.validate()?;
        if let Some(att) = &self.attack {
            att.validate()?;
        }
        Ok(())
    }
}

/// One repetition's measurements at one fault rate. Attack and speed
/// columns stay empty when those sections are disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub fault_rate: f64,
    pub rep: usize,
    pub accuracy: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub re_effectiveness_attacker: Option<f64>,
    pub re_effectiveness_victim: Option<f64>,
    pub transferability: Option<f64>,
    /// Mean first-detection window over detected testing malware.
    pub detection_speed: Option<f64>,
}

/// Mean and standard deviation over repetitions (sample std, zero for a
/// single repetition).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn over<I: IntoIterator<Item = f64>>(values: I) -> Option<Aggregate> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Aggregate { mean, std })
    }
}

/// Per-rate aggregation of the repetition records.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub fault_rate: f64,
    pub accuracy: Option<Aggregate>,
    pub false_positive_rate: Option<Aggregate>,
    pub false_negative_rate: Option<Aggregate>,
    pub re_effectiveness_attacker: Option<Aggregate>,
    pub re_effectiveness_victim: Option<Aggregate>,
    pub transferability: Option<Aggregate>,
    pub detection_speed: Option<Aggregate>,
}

impl SweepResult {
    /// Robustness readings for the trade-off table: how much of the
    /// attack the faults take away.
    pub fn re_robustness_attacker(&self) -> Option<f64> {
        self.re_effectiveness_attacker.map(|a| 1.0 - a.mean)
    }

    pub fn re_robustness_victim(&self) -> Option<f64> {
        self.re_effectiveness_victim.map(|a| 1.0 - a.mean)
    }

    pub fn transferability_robustness(&self) -> Option<f64> {
        self.transferability.map(|a| 1.0 - a.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<RepRecord>,
    pub results: Vec<SweepResult>,
}

/// Run the whole grid. The victim is trained once on its training folds
/// and reused at every rate; each (rate, repetition) pair owns derived
/// fault and proxy seeds, so any single repetition can be replayed from
/// the error context alone.
pub fn sweep(splits: &CorpusSplits, cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let victim_data = windows_with_labels::<f64>(&splits.victim_training_owned());
    let victim = train(&victim_data, &cfg.train)?;
    let quantized = QuantizedMlp::from_model(&victim)?;
    let testing_malware: Vec<ProgramTrace> = splits
        .testing
        .iter()
        .filter(|t| t.label == Label::Malware)
        .cloned()
        .collect();

    let mut records = Vec::with_capacity(cfg.fault_rates.len() * cfg.repetitions);
    for (ri, &rate) in cfg.fault_rates.iter().enumerate() {
        for rep in 0..cfg.repetitions {
            let rep_seed =
                derive_seed(cfg.master_seed, "sweep-rep", (ri * cfg.repetitions + rep) as u64);
            let record = run_rep(splits, cfg, &quantized, &testing_malware, rate, rep, rep_seed)
                .map_err(|e| Error::Sweep {
                    rate,
                    rep,
                    seed: rep_seed,
                    source: Box::new(e),
                })?;
            records.push(record);
        }
    }

    let results = cfg
        .fault_rates
        .iter()
        .map(|&rate| {
            let rows: Vec<&RepRecord> =
                records.iter().filter(|r| r.fault_rate == rate).collect();
            let agg = |pick: fn(&RepRecord) -> Option<f64>| {
                Aggregate::over(rows.iter().filter_map(|r| pick(r)))
            };
            SweepResult {
                fault_rate: rate,
                accuracy: agg(|r| r.accuracy),
                false_positive_rate: agg(|r| r.false_positive_rate),
                false_negative_rate: agg(|r| r.false_negative_rate),
                re_effectiveness_attacker: agg(|r| r.re_effectiveness_attacker),
                re_effectiveness_victim: agg(|r| r.re_effectiveness_victim),
                transferability: agg(|r| r.transferability),
                detection_speed: agg(|r| r.detection_speed),
            }
        })
        .collect();

    Ok(SweepOutput { records, results })
}

/// Fresh victim oracle for one section of a repetition, seeded so that
/// sections never share a fault stream.
fn section_oracle(
    quantized: &QuantizedMlp,
    cfg: &SweepConfig,
    rate: f64,
    rep_seed: u64,
    section: &str,
) -> Result<StochasticOracle> {
    let fault = FaultModel {
        fault_rate: rate,
        error_mode: cfg.error_mode,
        rng_seed: derive_seed(rep_seed, section, 0),
    };
    let engine = StochasticEngine::new(quantized.clone(), fault)?;
    Ok(StochasticOracle::new(engine, cfg.train.threshold))
}

fn run_rep(
    splits: &CorpusSplits,
    cfg: &SweepConfig,
    quantized: &QuantizedMlp,
    testing_malware: &[ProgramTrace],
    rate: f64,
    rep: usize,
    rep_seed: u64,
) -> Result<RepRecord> {
    let mut record = RepRecord {
        fault_rate: rate,
        rep,
        accuracy: None,
        false_positive_rate: None,
        false_negative_rate: None,
        re_effectiveness_attacker: None,
        re_effectiveness_victim: None,
        transferability: None,
        detection_speed: None,
    };

    let mut eval_oracle = section_oracle(quantized, cfg, rate, rep_seed, "eval")?;
    let m = metrics(confusion_over_traces::<f64, _>(&mut eval_oracle, &splits.testing)?);
    record.accuracy = m.accuracy;
    record.false_positive_rate = m.false_positive_rate;
    record.false_negative_rate = m.false_negative_rate;

    if let Some(att) = &cfg.attack {
        let victim_training = splits.victim_training_owned();
        for scenario in [Scenario::AttackerData, Scenario::VictimData] {
            let (domain, data): (&str, &[ProgramTrace]) = match scenario {
                Scenario::AttackerData => ("attacker-data", &splits.attacker_training),
                Scenario::VictimData => ("victim-data", &victim_training),
            };
            let mut proxy_cfg = att.proxy;
            proxy_cfg.train.seed = derive_seed(rep_seed, domain, 1);
            let mut re_oracle = section_oracle(quantized, cfg, rate, rep_seed, domain)?;
            let proxy = reverse_engineer(&mut re_oracle, data, &proxy_cfg)?;
            let effectiveness = re_effectiveness::<f64, _>(
                &proxy,
                &mut re_oracle,
                &splits.testing,
                proxy_cfg.train.threshold,
            )?;
            match scenario {
                Scenario::AttackerData => record.re_effectiveness_attacker = Some(effectiveness),
                Scenario::VictimData => record.re_effectiveness_victim = Some(effectiveness),
            }
            if scenario == att.scenario {
                let variants = generate_evasive_set(&proxy, data, att)?;
                let mut transfer_oracle =
                    section_oracle(quantized, cfg, rate, rep_seed, "transfer")?;
                record.transferability =
                    Some(transferability::<f64, _>(&variants, &mut transfer_oracle)?);
            }
        }
    }

    if cfg.detection_speed {
        let mut speed_oracle = section_oracle(quantized, cfg, rate, rep_seed, "speed")?;
        let report = detection_speed::<f64, _>(&mut speed_oracle, testing_malware)?;
        record.detection_speed = report.mean_window;
    }

    Ok(record)
}

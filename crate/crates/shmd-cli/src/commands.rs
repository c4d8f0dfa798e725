//! The six pipeline commands. Each one loads what it needs from the
//! output directory, writes its artifacts, and records a manifest; a
//! missing input names the command that produces it. All seeds are
//! derived from the master seed per domain, so any stage can be rerun
//! in isolation and land on identical bytes.

use anyhow::{bail, Context, Result};
use shmd_core::attack::{
    generate_evasive_set, reverse_engineer, save_proxy, Scenario, StochasticOracle,
};
use shmd_core::dataset::{
    generate_synthetic_corpus, load_traces, save_traces, split_folds, windows_with_labels,
    CorpusSplits, ProgramTrace,
};
use shmd_core::eval::{long_table, summary_table, sweep, tradeoff_table, SweepConfig};
use shmd_core::model::{load_model, quantize, save_model, train};
use shmd_core::pac::{bounds_table, verify_benchmark_sandwich, BenchmarkSandwichConfig};
use shmd_core::seeds::derive_seed;
use shmd_core::vos::{FaultModel, QuantizedMlp, StochasticEngine};
use shmd_core::Mlp64;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::manifest::{self, write_manifest, write_manifest_file, Manifest};

pub const CORPUS_FILE: &str = "corpus.json";
pub const MODEL_FILE: &str = "model.json";
pub const PROXY_FILE: &str = "proxy.json";
pub const EVASIVE_FILE: &str = "evasive_set.json";
pub const SWEEP_LONG_FILE: &str = "sweep_long.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const SWEEP_TRADEOFF_FILE: &str = "sweep_tradeoff.csv";
pub const BOUNDS_FILE: &str = "pac_bounds.csv";

/// A reproducibility or bounds guarantee failed; the repro command maps
/// this to its own exit code.
#[derive(Debug)]
pub struct AcceptanceViolation(pub String);

impl std::fmt::Display for AcceptanceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance violation: {}", self.0)
    }
}

impl std::error::Error for AcceptanceViolation {}

fn require(out_dir: &Path, name: &str, producer: &str) -> Result<PathBuf> {
    let p = out_dir.join(name);
    if !p.is_file() {
        bail!("missing {}: produce it with `shmd {producer}` first", p.display());
    }
    Ok(p)
}

fn load_corpus(cfg: &RunConfig) -> Result<Vec<ProgramTrace>> {
    let path = require(&cfg.out_dir, CORPUS_FILE, "gen-data")?;
    Ok(load_traces(&path)?)
}

fn load_victim(cfg: &RunConfig) -> Result<Mlp64> {
    let path = require(&cfg.out_dir, MODEL_FILE, "train")?;
    Ok(load_model(&path)?)
}

fn splits_for(cfg: &RunConfig, corpus: &[ProgramTrace]) -> Result<CorpusSplits> {
    Ok(split_folds(corpus, derive_seed(cfg.master_seed, "folds", 0))?)
}

fn attack_source(cfg: &RunConfig, splits: &CorpusSplits) -> Vec<ProgramTrace> {
    match cfg.attack.scenario {
        Scenario::AttackerData => splits.attacker_training.clone(),
        Scenario::VictimData => splits.victim_training_owned(),
    }
}

pub fn gen_data(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut spec = cfg.corpus.clone();
    spec.seed = derive_seed(cfg.master_seed, "corpus", 0);
    let corpus = generate_synthetic_corpus(&spec)?;
    save_traces(&corpus, &cfg.out_dir.join(CORPUS_FILE))?;
    write_manifest(&cfg.out_dir, "gen-data", config_hash, cfg.master_seed, &[CORPUS_FILE])
}

pub fn train_victim(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    let corpus = load_corpus(cfg)?;
    let splits = splits_for(cfg, &corpus)?;
    let mut tc = cfg.train;
    tc.seed = derive_seed(cfg.master_seed, "train", 0);
    let data = windows_with_labels::<f64>(&splits.victim_training_owned());
    let model = train(&data, &tc)?;
    // Stored on the fixed-point grid: the saved file is exactly what the
    // inference engine runs, and grid points round-trip bit for bit.
    save_model(&quantize(&model)?, &cfg.out_dir.join(MODEL_FILE))?;
    write_manifest(&cfg.out_dir, "train", config_hash, cfg.master_seed, &[MODEL_FILE])
}

/// Reverse engineer a proxy through the label oracle and emit the
/// evasive variants it crafts. The victim operates at the first rate of
/// the fault grid, so a grid starting at 0 attacks the deterministic
/// detector and a custom grid attacks a protected one.
pub fn attack(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    let corpus = load_corpus(cfg)?;
    let victim = load_victim(cfg)?;
    let splits = splits_for(cfg, &corpus)?;

    let mut att = cfg.attack.clone();
    att.proxy.train.seed = derive_seed(cfg.master_seed, "attack", 0);
    att.validate()?;

    let fault = FaultModel {
        fault_rate: cfg.faults.rates[0],
        error_mode: cfg.faults.error_mode,
        rng_seed: derive_seed(cfg.master_seed, "attack-oracle", 0),
    };
    let engine = StochasticEngine::new(QuantizedMlp::from_model(&victim)?, fault)?;
    let mut oracle = StochasticOracle::new(engine, cfg.train.threshold);

    let source = attack_source(cfg, &splits);
    let proxy = reverse_engineer(&mut oracle, &source, &att.proxy)?;
    save_proxy(&proxy, &cfg.out_dir.join(PROXY_FILE))?;

    let variants = generate_evasive_set(&proxy, &source, &att)?;
    let file = fs::File::create(cfg.out_dir.join(EVASIVE_FILE))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &variants)?;

    write_manifest(
        &cfg.out_dir,
        "attack",
        config_hash,
        cfg.master_seed,
        &[PROXY_FILE, EVASIVE_FILE],
    )
}

/// Run the full fault-rate sweep and emit the three result tables. The
/// sweep trains its own victim from the same derived seed the train
/// command uses, so its rate-0 rows describe exactly the stored model.
pub fn sweep_tables(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    let corpus = load_corpus(cfg)?;
    let splits = splits_for(cfg, &corpus)?;
    let mut tc = cfg.train;
    tc.seed = derive_seed(cfg.master_seed, "train", 0);
    let att = cfg.attack.clone();
    att.validate()?;

    let sc = SweepConfig {
        fault_rates: cfg.faults.rates.clone(),
        repetitions: cfg.repetitions,
        error_mode: cfg.faults.error_mode,
        train: tc,
        attack: Some(att),
        detection_speed: true,
        master_seed: derive_seed(cfg.master_seed, "sweep", 0),
    };
    let output = sweep(&splits, &sc)?;

    fs::write(cfg.out_dir.join(SWEEP_LONG_FILE), long_table(&output.records))?;
    fs::write(cfg.out_dir.join(SWEEP_SUMMARY_FILE), summary_table(&output.results))?;
    fs::write(cfg.out_dir.join(SWEEP_TRADEOFF_FILE), tradeoff_table(&output.results))?;

    write_manifest(
        &cfg.out_dir,
        "sweep",
        config_hash,
        cfg.master_seed,
        &[SWEEP_LONG_FILE, SWEEP_SUMMARY_FILE, SWEEP_TRADEOFF_FILE],
    )
}

/// Estimate the mimicry error bounds at every swept fault rate and
/// write the bounds table. A lower bound exceeding the observed proxy
/// disagreement is reported as an error, not smoothed over.
pub fn pac_bounds(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    let corpus = load_corpus(cfg)?;
    let victim = load_victim(cfg)?;
    let splits = splits_for(cfg, &corpus)?;

    let mut rows = Vec::with_capacity(cfg.faults.rates.len());
    for (i, &rate) in cfg.faults.rates.iter().enumerate() {
        let fault = FaultModel {
            fault_rate: rate,
            error_mode: cfg.faults.error_mode,
            rng_seed: derive_seed(cfg.master_seed, "pac", i as u64),
        };
        let engine = StochasticEngine::new(QuantizedMlp::from_model(&victim)?, fault)?;
        let mut pcfg = BenchmarkSandwichConfig {
            proxy: cfg.attack.proxy,
            threshold: cfg.train.threshold,
            ..BenchmarkSandwichConfig::default()
        };
        pcfg.proxy.train.seed = derive_seed(cfg.master_seed, "pac-proxy", i as u64);
        let report =
            verify_benchmark_sandwich(&engine, &splits.attacker_training, &splits.testing, &pcfg)?;
        rows.push((rate, report));
    }
    fs::write(cfg.out_dir.join(BOUNDS_FILE), bounds_table(&rows))?;

    write_manifest(&cfg.out_dir, "pac", config_hash, cfg.master_seed, &[BOUNDS_FILE])
}

/// Run the whole pipeline, then hold it to the reproducibility bar: if a
/// previous repro run with the same effective configuration left a
/// manifest behind, every artifact must hash identically. Violations of
/// either that or the bounds checks surface as [`AcceptanceViolation`].
pub fn repro(cfg: &RunConfig, config_hash: &str) -> Result<Manifest> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let prior = match manifest::read_manifest(&cfg.out_dir, "repro") {
        Ok(m) if m.config_sha256 == config_hash => Some(m),
        _ => None,
    };

    let stages: [fn(&RunConfig, &str) -> Result<Manifest>; 5] =
        [gen_data, train_victim, attack, sweep_tables, pac_bounds];
    let mut artifacts = Vec::new();
    for stage in stages {
        let m = stage(cfg, config_hash).map_err(escalate_bounds_failure)?;
        artifacts.extend(m.artifacts);
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));

    let current = Manifest {
        command: "repro".to_string(),
        config_sha256: config_hash.to_string(),
        master_seed: cfg.master_seed,
        artifacts,
    };
    write_manifest_file(&cfg.out_dir, &current)?;

    if let Some(prev) = prior {
        for (old, new) in prev.artifacts.iter().zip(&current.artifacts) {
            if old != new {
                bail!(AcceptanceViolation(format!(
                    "artifact {} drifted from the previous run with the same config \
                     (recorded {}, produced {})",
                    new.path, old.sha256, new.sha256
                )));
            }
        }
        if prev.artifacts.len() != current.artifacts.len() {
            bail!(AcceptanceViolation(
                "artifact set differs from the previous run with the same config".to_string()
            ));
        }
    }
    Ok(current)
}

/// Inside repro, a bounds-sandwich failure is an acceptance violation
/// rather than a plain runtime error.
fn escalate_bounds_failure(err: anyhow::Error) -> anyhow::Error {
    let sandwich = err
        .chain()
        .filter_map(|c| c.downcast_ref::<shmd_core::Error>())
        .any(|e| matches!(e, shmd_core::Error::Sandwich(_)));
    if sandwich {
        anyhow::Error::new(AcceptanceViolation(err.to_string()))
    } else {
        err
    }
}

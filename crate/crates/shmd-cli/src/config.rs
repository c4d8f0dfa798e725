//! Run configuration: one TOML file drives every subcommand, with a few
//! flag overrides layered on top. A run is a pure function of the
//! effective configuration plus the master seed, so every manifest
//! records the hash of the effective configuration.
//!
//! Seed fan-out: `master_seed` is the only seed a user sets. Nested
//! `seed` fields inside the corpus, training and attack sections are
//! ignored and replaced by values derived per domain (corpus, folds,
//! victim training, attack, sweep, bounds), so each stage stays
//! independently replayable from the one master value.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use shmd_core::attack::{AttackConfig, Scenario};
use shmd_core::dataset::CorpusSpec;
use shmd_core::model::TrainConfig;
use shmd_core::vos::ErrorMode;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Where artifacts and manifests land; `--out` overrides.
    pub out_dir: PathBuf,
    /// Root of the whole seed tree; `--seed` overrides.
    pub master_seed: u64,
    /// Sweep repetitions per fault rate; `--reps` overrides.
    pub repetitions: usize,
    pub corpus: CorpusSpec,
    pub train: TrainConfig<f64>,
    pub faults: FaultGrid,
    pub attack: AttackConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultGrid {
    /// Ascending fault rates, each in [0, 1]; `--fault-rates` overrides.
    pub rates: Vec<f64>,
    pub error_mode: ErrorMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("out"),
            master_seed: 7,
            repetitions: 50,
            corpus: CorpusSpec::default(),
            train: TrainConfig::default(),
            faults: FaultGrid::default(),
            attack: AttackConfig::default(),
        }
    }
}

impl Default for FaultGrid {
    fn default() -> Self {
        FaultGrid {
            rates: vec![0.0, 0.1, 0.3, 0.5],
            error_mode: ErrorMode::UniformBitFlip,
        }
    }
}

/// Flag-level overrides applied on top of the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fault_rates: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub scenario: Option<Scenario>,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut cfg: RunConfig =
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))?;
    if let Some(out) = &overrides.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.master_seed = seed;
    }
    if let Some(rates) = &overrides.fault_rates {
        cfg.faults.rates = rates.clone();
    }
    if let Some(reps) = overrides.reps {
        cfg.repetitions = reps;
    }
    if let Some(scenario) = overrides.scenario {
        cfg.attack.scenario = scenario;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.faults.rates.is_empty() {
            bail!("faults.rates needs at least one fault rate");
        }
        for r in &self.faults.rates {
            if !r.is_finite() || !(0.0..=1.0).contains(r) {
                bail!("faults.rates entry {r} is outside [0, 1]");
            }
        }
        if self.faults.rates.windows(2).any(|p| p[1] <= p[0]) {
            bail!("faults.rates must be strictly ascending");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        Ok(())
    }

    /// Hash of the effective configuration (file plus overrides), the
    /// identity every manifest carries.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        crate::manifest::sha256_hex(canonical.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("run.toml");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_file_yields_the_default_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "");
        let cfg = load(&p, &Overrides::default()).unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.faults.rates, vec![0.0, 0.1, 0.3, 0.5]);
    }

    #[test]
    fn partial_sections_fill_from_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(
            dir.path(),
            "master_seed = 99\n[corpus]\nn_malware = 12\n[train]\nepochs = 3\n",
        );
        let cfg = load(&p, &Overrides::default()).unwrap();
        assert_eq!(cfg.master_seed, 99);
        assert_eq!(cfg.corpus.n_malware, 12);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.corpus.n_benign, CorpusSpec::default().n_benign);
    }

    #[test]
    fn unknown_fields_are_named_in_the_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "master_sead = 3\n");
        let err = format!("{:#}", load(&p, &Overrides::default()).unwrap_err());
        assert!(err.contains("master_sead"), "{err}");
    }

    #[test]
    fn overrides_replace_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "master_seed = 1\n[faults]\nrates = [0.0]\n");
        let ov = Overrides {
            seed: Some(5),
            fault_rates: Some(vec![0.0, 0.9]),
            reps: Some(2),
            scenario: Some(Scenario::VictimData),
            out: Some(PathBuf::from("elsewhere")),
        };
        let cfg = load(&p, &ov).unwrap();
        assert_eq!(cfg.master_seed, 5);
        assert_eq!(cfg.faults.rates, vec![0.0, 0.9]);
        assert_eq!(cfg.repetitions, 2);
        assert_eq!(cfg.attack.scenario, Scenario::VictimData);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn bad_grids_and_counts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for body in [
            "[faults]\nrates = []\n",
            "[faults]\nrates = [0.5, 0.1]\n",
            "[faults]\nrates = [1.5]\n",
            "repetitions = 0\n",
        ] {
            let p = write_config(dir.path(), body);
            assert!(load(&p, &Overrides::default()).is_err(), "{body}");
        }
    }

    #[test]
    fn config_hash_tracks_effective_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "");
        let a = load(&p, &Overrides::default()).unwrap();
        let b = load(&p, &Overrides { seed: Some(8), ..Overrides::default() }).unwrap();
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256(), load(&p, &Overrides::default()).unwrap().sha256());
    }
}

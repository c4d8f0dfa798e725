//! End-to-end pipeline over the public API: generate a corpus, split it,
//! train and quantize a victim, run it under faults, extract a proxy,
//! evade it, and round-trip every artifact through disk.

use shmd_core::attack::{
    generate_evasive_set, reverse_engineer, AttackConfig, ProxyArchitecture, ProxyConfig,
    Scenario, StochasticOracle,
};
use shmd_core::dataset::{
    generate_synthetic_corpus, load_traces, save_traces, split_folds, windows_with_labels,
    CorpusSpec,
};
use shmd_core::eval::{
    confusion_over_traces, metrics, re_effectiveness, sweep, transferability, SweepConfig,
};
use shmd_core::model::{load_model, quantize, save_model, train, TrainConfig};
use shmd_core::vos::{ErrorMode, FaultModel, QuantizedMlp, StochasticEngine};
use shmd_core::Mlp64;

fn pipeline_spec() -> CorpusSpec {
    CorpusSpec {
        n_malware: 32,
        n_benign: 16,
        n_families: 2,
        windows_per_program_range: (3, 6),
        counts_per_window: 2000,
        seed: 401,
        ..CorpusSpec::default()
    }
}

#[test]
fn corpus_to_evasion_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_synthetic_corpus(&pipeline_spec()).unwrap();

    let corpus_path = dir.path().join("corpus.jsonl");
    save_traces(&corpus, &corpus_path).unwrap();
    assert_eq!(load_traces(&corpus_path).unwrap(), corpus);

    let splits = split_folds(&corpus, 402).unwrap();
    let data = windows_with_labels::<f64>(&splits.victim_training_owned());
    let victim = train(
        &data,
        &TrainConfig {
            epochs: 8,
            seed: 403,
            ..TrainConfig::default()
        },
    )
    .unwrap();

    // Models travel through the grid snap so the stored weights are
    // exactly what fixed-point inference uses.
    let snapped: Mlp64 = quantize(&victim).unwrap();
    let model_path = dir.path().join("model.json");
    save_model(&snapped, &model_path).unwrap();
    let restored: Mlp64 = load_model(&model_path).unwrap();
    assert_eq!(restored, snapped);

    let engine = StochasticEngine::new(
        QuantizedMlp::from_model(&restored).unwrap(),
        FaultModel {
            fault_rate: 0.25,
            error_mode: ErrorMode::UniformBitFlip,
            rng_seed: 404,
        },
    )
    .unwrap();
    let mut oracle = StochasticOracle::new(engine, 0.5);
    let report = metrics(confusion_over_traces::<f64, _>(&mut oracle, &splits.testing).unwrap());
    let accuracy = report.accuracy.expect("testing fold holds both classes");
    assert!(
        accuracy > 0.6,
        "faulted detector should beat chance on held-out traces, got {accuracy}"
    );

    let proxy_cfg = ProxyConfig {
        architecture: ProxyArchitecture::Logistic,
        train: TrainConfig {
            epochs: 6,
            seed: 405,
            ..TrainConfig::default()
        },
        max_windows: Some(80),
        ..ProxyConfig::default()
    };
    let proxy = reverse_engineer(&mut oracle, &splits.attacker_training, &proxy_cfg).unwrap();
    let agreement =
        re_effectiveness::<f64, _>(&proxy, &mut oracle, &splits.testing, 0.5).unwrap();
    assert!((0.0..=1.0).contains(&agreement));

    let att = AttackConfig {
        proxy: proxy_cfg,
        epsilon: 0.05,
        k_per_block: 2,
        iterations: 2,
        scenario: Scenario::AttackerData,
    };
    let variants = generate_evasive_set(&proxy, &splits.attacker_training, &att).unwrap();
    assert!(!variants.is_empty());
    for v in &variants {
        assert_eq!(v.original.windows.len(), v.result.windows.len());
        for (before, after) in v.original.windows.iter().zip(&v.result.windows) {
            for (b, a) in before.counts.iter().zip(&after.counts) {
                assert!(a >= b, "injection can only add instructions, never remove them");
            }
        }
    }
    let transfer = transferability::<f64, _>(&variants, &mut oracle).unwrap();
    assert!((0.0..=1.0).contains(&transfer));
}

#[test]
fn pipeline_is_deterministic_end_to_end() {
    let run = || {
        let corpus = generate_synthetic_corpus(&pipeline_spec()).unwrap();
        let splits = split_folds(&corpus, 402).unwrap();
        let cfg = SweepConfig {
            fault_rates: vec![0.0, 0.4],
            repetitions: 2,
            error_mode: ErrorMode::UniformBitFlip,
            train: TrainConfig {
                epochs: 6,
                seed: 406,
                ..TrainConfig::default()
            },
            attack: None,
            detection_speed: true,
            master_seed: 407,
        };
        sweep(&splits, &cfg).unwrap()
    };
    assert_eq!(run(), run());
}

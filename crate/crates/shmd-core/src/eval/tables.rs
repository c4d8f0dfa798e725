//! Plot-ready CSV renderings of sweep output. Headers are fixed, rows
//! follow input order, floats print with six decimals, and undefined
//! values print as NA, so equal sweeps render byte-identical tables.

use std::fmt::Write;

use crate::eval::sweep::{RepRecord, SweepResult};

/// Column order for the per-repetition and summary tables.
const METRICS: [(&str, fn(&RepRecord) -> Option<f64>); 7] = [
    ("accuracy", |r| r.accuracy),
    ("false_positive_rate", |r| r.false_positive_rate),
    ("false_negative_rate", |r| r.false_negative_rate),
    ("re_effectiveness_attacker", |r| r.re_effectiveness_attacker),
    ("re_effectiveness_victim", |r| r.re_effectiveness_victim),
    ("transferability", |r| r.transferability),
    ("detection_speed", |r| r.detection_speed),
];

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NA".into(),
    }
}

/// Long format, one row per (repetition, metric):
/// `fault_rate,rep,metric,value`.
pub fn long_table(records: &[RepRecord]) -> String {
    let mut out = String::from("fault_rate,rep,metric,value\n");
    for r in records {
        for (name, pick) in METRICS {
            let _ = writeln!(out, "{:.6},{},{},{}", r.fault_rate, r.rep, name, cell(pick(r)));
        }
    }
    out
}

/// Per-rate aggregation, one row per (rate, metric):
/// `fault_rate,metric,mean,std`.
pub fn summary_table(results: &[SweepResult]) -> String {
    let pairs: [(&str, fn(&SweepResult) -> Option<crate::eval::sweep::Aggregate>); 7] = [
        ("accuracy", |r| r.accuracy),
        ("false_positive_rate", |r| r.false_positive_rate),
        ("false_negative_rate", |r| r.false_negative_rate),
        ("re_effectiveness_attacker", |r| r.re_effectiveness_attacker),
        ("re_effectiveness_victim", |r| r.re_effectiveness_victim),
        ("transferability", |r| r.transferability),
        ("detection_speed", |r| r.detection_speed),
    ];
    let mut out = String::from("fault_rate,metric,mean,std\n");
    for r in results {
        for (name, pick) in pairs {
            let agg = pick(r);
            let _ = writeln!(
                out,
                "{:.6},{},{},{}",
                r.fault_rate,
                name,
                cell(agg.map(|a| a.mean)),
                cell(agg.map(|a| a.std)),
            );
        }
    }
    out
}

/// The security/performance trade-off surface, one row per rate:
/// `fault_rate,accuracy,re_robustness_attacker,re_robustness_victim,transferability_robustness`.
pub fn tradeoff_table(results: &[SweepResult]) -> String {
    let mut out = String::from(
        "fault_rate,accuracy,re_robustness_attacker,re_robustness_victim,transferability_robustness\n",
    );
    for r in results {
        let _ = writeln!(
            out,
            "{:.6},{},{},{},{}",
            r.fault_rate,
            cell(r.accuracy.map(|a| a.mean)),
            cell(r.re_robustness_attacker()),
            cell(r.re_robustness_victim()),
            cell(r.transferability_robustness()),
        );
    }
    out
}

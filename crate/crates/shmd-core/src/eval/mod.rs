//! Measurement: detection metrics, attack effectiveness, detection
//! speed, and the fault-rate sweep that ties them together.

mod metrics;
mod speed;
mod sweep;
mod tables;

pub use metrics::{
    confusion_over_traces, f1_score, metrics, re_effectiveness, transferability, ConfusionCounts,
    MetricsReport,
};
pub use speed::{detection_speed, DetectionSpeedReport};
pub use sweep::{sweep, Aggregate, RepRecord, SweepConfig, SweepOutput, SweepResult};
pub use tables::{long_table, summary_table, tradeoff_table};

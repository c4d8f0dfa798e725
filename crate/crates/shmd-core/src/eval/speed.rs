//! Detection speed: how many execution windows pass before the detector
//! first flags a malware program.

use serde::{Deserialize, Serialize};

use crate::attack::DetectorOracle;
use crate::dataset::{Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpeedReport {
    /// 1-based index of the first window flagged, per trace in input
    /// order. `None` means the program ran to completion unflagged.
    pub first_detection: Vec<Option<usize>>,
    /// Mean first-detection window over the detected traces.
    pub mean_window: Option<f64>,
    /// `cumulative[w]` is the fraction of traces flagged within the first
    /// `w + 1` windows; the length matches the longest trace.
    pub cumulative: Vec<f64>,
}

/// Scan each malware trace window by window and record when the oracle
/// first says malware. Queries stop at the first detection, mirroring a
/// monitor that raises an alarm and moves on.
pub fn detection_speed<F: Scalar, O: DetectorOracle<F> + ?Sized>(
    oracle: &mut O,
    malware_traces: &[ProgramTrace],
) -> Result<DetectionSpeedReport> {
    if malware_traces.is_empty() {
        return Err(Error::EmptyInput(
            "detection speed needs at least one malware trace".into(),
        ));
    }
    let mut first_detection = Vec::with_capacity(malware_traces.len());
    let mut longest = 0usize;
    for t in malware_traces {
        longest = longest.max(t.windows.len());
        let mut hit = None;
        for (i, w) in t.windows.iter().enumerate() {
            let x = w.features::<F>();
            if oracle.label_window(&x)? == Label::Malware {
                hit = Some(i + 1);
                break;
            }
        }
        first_detection.push(hit);
    }

    let detected: Vec<usize> = first_detection.iter().flatten().copied().collect();
    let mean_window = if detected.is_empty() {
        None
    } else {
        Some(detected.iter().sum::<usize>() as f64 / detected.len() as f64)
    };
    let n = malware_traces.len() as f64;
    let cumulative = (1..=longest)
        .map(|w| first_detection.iter().flatten().filter(|&&d| d <= w).count() as f64 / n)
        .collect();
    Ok(DetectionSpeedReport { first_detection, mean_window, cumulative })
}

//! Line-oriented trace file format.
//!
//! One JSON object per line, one line per program:
//!
//! ```text
//! {"program_id":"m00001","label":"malware","family":"mal0","windows":[{"counts":[...],"basic_blocks":1250}, ...]}
//! ```
//!
//! Loading validates every record (category arity, positive window totals,
//! at least one basic block and one window) and reports failures with their
//! 1-based line number. An empty file is a valid empty dataset.

use super::ProgramTrace;
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn save_traces(traces: &[ProgramTrace], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_traces(path: &Path) -> Result<Vec<ProgramTrace>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: ProgramTrace = serde_json::from_str(&line).map_err(|e| Error::TraceParse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        trace.validate().map_err(|e| Error::TraceParse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(trace);
    }
    Ok(out)
}

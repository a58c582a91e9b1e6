//! CSV and JSON reports. Floats are written with 17 significant digits.

use std::path::Path;

use crate::analysis::{ConsistencyReport, ResponseMatrix};
use crate::error::Result;
use crate::grad::TrainTrace;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_writer(std::fs::File::create(path).map_err(super::at(path))?))
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per `(channel, bin)`: `channel,fs,f_bin,magnitude_db`.
pub fn write_response_csv(path: impl AsRef<Path>, responses: &[ResponseMatrix]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["channel", "fs", "f_bin", "magnitude_db"])?;
    for r in responses {
        let db = r.magnitudes_db();
        for (m, row) in db.outer_iter().enumerate() {
            for (f, v) in r.bin_frequencies.iter().zip(row) {
                w.write_record([m.to_string(), sci(r.fs), sci(*f), sci(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_consistency_json(path: impl AsRef<Path>, report: &ConsistencyReport) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serde_json::to_string_pretty(report)? + "\n").map_err(super::at(path))?;
    Ok(())
}

/// `step,loss,<param names...>`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &TrainTrace) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let mut header = vec!["step".to_string(), "loss".to_string()];
    header.extend(trace.param_names.iter().cloned());
    w.write_record(&header)?;
    for row in &trace.rows {
        let mut rec = vec![row.step.to_string(), sci(row.loss)];
        rec.extend(row.params.iter().map(|v| sci(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

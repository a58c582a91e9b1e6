//! File formats: WAV audio, filterbank JSON, weight binaries and CSV/JSON
//! reports.

use std::path::Path;

use crate::error::Error;

mod bank;
mod report;
mod wav;
mod weights;

pub use bank::{read_bank, write_bank, BankFile};
pub use report::{write_consistency_json, write_response_csv, write_trace_csv};
pub use wav::{read_wav, write_wav, AudioBuffer, BitDepth};
pub use weights::{read_weights, sidecar_path, write_weights, WeightSidecar};

/// Prefixes an I/O error with the path it concerns.
fn at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

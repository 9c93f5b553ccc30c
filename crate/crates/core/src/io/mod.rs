//! Instance files, iteration logs and run summaries.

pub mod native;
pub mod report;
pub mod sdpa;

pub use native::{parse_native, write_native, NativeError};
pub use report::{emit_report, summary_json, trace_csv, trace_jsonl, LogFormat};
pub use sdpa::{parse_sdpa, write_sdpa, SdpaError};

use crate::model::SdpInstance;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Sdpa { path: String, source: SdpaError },
    #[error("{path}: {source}")]
    Native { path: String, source: NativeError },
}

/// `.json` files are read as native, everything else as SDPA.
pub fn read_instance(path: &Path) -> Result<SdpInstance, ReadError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ReadError::Io { path: p.clone(), source })?;
    if is_native_path(path) {
        parse_native(&text).map_err(|source| ReadError::Native { path: p, source })
    } else {
        parse_sdpa(&text).map_err(|source| ReadError::Sdpa { path: p, source })
    }
}

pub fn is_native_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

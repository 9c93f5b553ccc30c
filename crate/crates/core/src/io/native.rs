//! Native instance format: self-describing JSON with dense matrices.
//!
//! Numbers are written in shortest round-trip form, so reading a written
//! file reproduces every entry bit for bit.

use crate::model::SdpInstance;
use serde::{Deserialize, Serialize};

pub const FORMAT_NAME: &str = "pcsdp-instance";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum NativeError {
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected format `{format}` version {version}")]
    WrongFormat { format: String, version: u32 },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    instance: T,
}

pub fn write_native(inst: &SdpInstance) -> String {
    let env = Envelope { format: FORMAT_NAME.into(), version: FORMAT_VERSION, instance: inst };
    serde_json::to_string(&env).expect("instance serializes")
}

pub fn parse_native(text: &str) -> Result<SdpInstance, NativeError> {
    let env: Envelope<SdpInstance> = serde_json::from_str(text)?;
    if env.format != FORMAT_NAME || env.version != FORMAT_VERSION {
        return Err(NativeError::WrongFormat { format: env.format, version: env.version });
    }
    Ok(env.instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    #[test]
    fn round_trip_and_header() {
        let inst = SdpInstance::new(
            vec![1.0 / 3.0],
            vec![SymMatrix::from_rows(&[vec![0.1, 0.2], vec![0.2, 1e-300]]).unwrap()],
            SymMatrix::identity(2),
            vec![],
            true,
        )
        .unwrap();
        let txt = write_native(&inst);
        assert!(txt.starts_with("{\"format\":\"pcsdp-instance\",\"version\":1"));
        assert_eq!(parse_native(&txt).unwrap(), inst);
        let wrong = txt.replace("\"version\":1", "\"version\":9");
        assert!(matches!(parse_native(&wrong), Err(NativeError::WrongFormat { .. })));
    }
}

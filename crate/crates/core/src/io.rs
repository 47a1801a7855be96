//! Binary matrix files and the JSON run report.
//!
//! The CMAT layout is fixed: magic `CMAT`, little-endian `u32` version (1),
//! `u64` rows, `u64` cols, then `rows·cols` little-endian `f64` values in
//! row-major order. Write→read round trips are bit-exact.

use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::BoundReport;
use crate::caldera::{DecompositionConfig, PhaseTimings, SaturationSummary};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const CMAT_MAGIC: &[u8; 4] = b"CMAT";
pub const CMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Serialize a matrix into the CMAT byte layout.
pub fn cmat_bytes(m: &Matrix) -> Vec<u8> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * rows * cols);
    out.extend_from_slice(CMAT_MAGIC);
    out.extend_from_slice(&CMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Parse a CMAT byte buffer, reporting the byte offset of any malformation.
pub fn parse_cmat(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        });
    }
    if &bytes[0..4] != CMAT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad magic {:?}, expected {:?}", &bytes[0..4], CMAT_MAGIC),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CMAT_VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(Error::Format {
            offset: 8,
            reason: "dimension overflow".into(),
        })?;
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected) as u64,
            reason: format!("payload is {} bytes, expected {expected}", bytes.len()),
        });
    }
    let mut m = Matrix::zeros(rows, cols);
    let mut off = HEADER_LEN;
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
    }
    Ok(m)
}

pub fn write_cmat(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&cmat_bytes(m))?;
    Ok(())
}

pub fn read_cmat(path: impl AsRef<Path>) -> Result<Matrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_cmat(&bytes)
}

/// Sidecar metadata written next to a serialized Hessian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HessianMeta {
    pub schema_version: u32,
    pub rows: usize,
    pub dim: usize,
    pub delta: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

/// Machine-readable record of one decomposition run. Numbers serialize with
/// full round-trip precision; field order is fixed by this struct.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config: DecompositionConfig,
    pub shape: (usize, usize),
    pub best_error: f64,
    pub error_trace: Vec<f64>,
    pub saturation: SaturationSummary,
    pub fallback_events: usize,
    pub bounds: Option<BoundReport>,
    pub timings: PhaseTimings,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format {
            offset: 0,
            reason: format!("run report: {e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = stream_rng(1);
        let m = Matrix::from_fn(7, 5, |_, _| standard_normal(&mut rng));
        let bytes = cmat_bytes(&m);
        let back = parse_cmat(&bytes).unwrap();
        assert_eq!(m, back);
        assert_eq!(bytes, cmat_bytes(&back));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.cmat");
        let mut rng = stream_rng(2);
        let m = Matrix::from_fn(3, 9, |_, _| standard_normal(&mut rng));
        write_cmat(&path, &m).unwrap();
        assert_eq!(read_cmat(&path).unwrap(), m);
    }

    #[test]
    fn bad_magic_names_offset_zero() {
        let mut bytes = cmat_bytes(&Matrix::zeros(2, 2));
        bytes[0] = b'X';
        match parse_cmat(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = cmat_bytes(&Matrix::zeros(4, 4));
        assert!(parse_cmat(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_cmat(&bytes[..10]).is_err());
    }

    #[test]
    fn special_values_survive() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = -0.0;
        m[(0, 1)] = f64::MIN_POSITIVE;
        m[(1, 0)] = 1.0 + f64::EPSILON;
        m[(1, 1)] = -1.23456789012345e300;
        let back = parse_cmat(&cmat_bytes(&m)).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest! {
        #[test]
        fn arbitrary_matrices_round_trip(
            rows in 1usize..12,
            cols in 1usize..12,
            seed in any::<u64>(),
        ) {
            let mut rng = stream_rng(seed);
            let m = Matrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng));
            prop_assert_eq!(parse_cmat(&cmat_bytes(&m)).unwrap(), m);
        }
    }
}

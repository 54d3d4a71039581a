//! Snapshot persistence for fitted states.
//!
//! A snapshot is a single JSON document carrying a version tag, the basis
//! parameters (when present), the sample count, λ, and the row-major
//! inverse (plus the matrix when retained). Serialization is deterministic:
//! the same state always produces the same bytes, integers round-trip
//! bit-exactly, and doubles use shortest-round-trip formatting so they are
//! lossless as well.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::moment::MomentState;

const SNAPSHOT_VERSION: &str = "momentup/1";

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    version: String,
    d: Option<usize>,
    n: Option<usize>,
    width: usize,
    sample_count: u64,
    lambda: f64,
    inv: Vec<f64>,
    matrix: Option<Vec<f64>>,
    resymmetrize_every: Option<u64>,
    updates_applied: u64,
}

impl MomentState {
    /// Write the state as a snapshot document.
    pub fn save_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let file = SnapshotFile {
            version: SNAPSHOT_VERSION.to_string(),
            d: self.basis().map(|b| b.dimension()),
            n: self.basis().map(|b| b.max_degree()),
            width: self.width(),
            sample_count: self.sample_count(),
            lambda: self.lambda(),
            inv: self.inverse().as_slice().to_vec(),
            matrix: self.matrix().map(|m| m.as_slice().to_vec()),
            resymmetrize_every: self.resymmetrize_every(),
            updates_applied: self.updates_applied(),
        };
        serde_json::to_writer(writer, &file).map_err(|e| Error::Snapshot(e.to_string()))
    }

    /// Load a state previously written by [`MomentState::save_snapshot`].
    pub fn load_snapshot<R: Read>(reader: R) -> Result<MomentState> {
        let file: SnapshotFile =
            serde_json::from_reader(reader).map_err(|e| Error::Snapshot(e.to_string()))?;
        if file.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {:?} (expected {SNAPSHOT_VERSION:?})",
                file.version
            )));
        }
        let s = file.width;
        let basis = match (file.d, file.n) {
            (Some(d), Some(n)) => {
                let b = MonomialBasis::new(d, n)?;
                if b.size() != s {
                    return Err(Error::Snapshot(format!(
                        "basis d={d}, n={n} has size {}, snapshot width is {s}",
                        b.size()
                    )));
                }
                Some(Arc::new(b))
            }
            (None, None) => None,
            _ => {
                return Err(Error::Snapshot(
                    "snapshot carries only one of d and n".to_string(),
                ))
            }
        };
        let inv = Mat::from_vec(s, s, file.inv)
            .map_err(|_| Error::Snapshot("inverse payload has the wrong length".to_string()))?;
        let matrix = file
            .matrix
            .map(|m| {
                Mat::from_vec(s, s, m)
                    .map_err(|_| Error::Snapshot("matrix payload has the wrong length".to_string()))
            })
            .transpose()?;

        Ok(MomentState::restore(
            basis,
            s,
            file.sample_count,
            file.lambda,
            inv,
            matrix,
            file.resymmetrize_every,
            file.updates_applied,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::FitOptions;

    fn fitted() -> MomentState {
        let basis = MonomialBasis::new(2, 1).unwrap();
        let points = vec![
            vec![0.1, 0.2],
            vec![-0.4, 0.9],
            vec![0.7, -0.3],
            vec![0.2, 0.6],
        ];
        let opts = FitOptions {
            lambda: 1e-9,
            track_matrix: true,
            ..FitOptions::default()
        };
        MomentState::fit(&points, basis, &opts).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let state = fitted();
        let mut buf = Vec::new();
        state.save_snapshot(&mut buf).unwrap();
        let loaded = MomentState::load_snapshot(buf.as_slice()).unwrap();

        assert_eq!(loaded.sample_count(), state.sample_count());
        assert_eq!(loaded.width(), state.width());
        assert_eq!(loaded.lambda().to_bits(), state.lambda().to_bits());
        for (a, b) in loaded
            .inverse()
            .as_slice()
            .iter()
            .zip(state.inverse().as_slice())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let (ma, mb) = (loaded.matrix().unwrap(), state.matrix().unwrap());
        for (a, b) in ma.as_slice().iter().zip(mb.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let b = loaded.basis().unwrap();
        assert_eq!((b.dimension(), b.max_degree()), (2, 1));
    }

    #[test]
    fn serialization_is_deterministic() {
        let state = fitted();
        let mut a = Vec::new();
        let mut b = Vec::new();
        state.save_snapshot(&mut a).unwrap();
        state.save_snapshot(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let state = fitted();
        let mut buf = Vec::new();
        state.save_snapshot(&mut buf).unwrap();
        let tampered = String::from_utf8(buf)
            .unwrap()
            .replace("momentup/1", "momentup/99");
        assert!(matches!(
            MomentState::load_snapshot(tampered.as_bytes()),
            Err(Error::Snapshot(_))
        ));
    }
}

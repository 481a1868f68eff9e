//! Model checkpoint format: an 8-byte magic, one JSON header line holding
//! the network shape, then every parameter tensor as little-endian f32 in
//! canonical order (conv1 weights, conv1 bias, ..., dense2 bias).
//!
//! Parameters are kept f32-representable from initialization onward, so a
//! round trip through this file reproduces the network bit for bit.

use std::fs;
use std::path::Path;

use super::DataError;
use crate::nn::{ConvLayer, DenseLayer, Network, NetworkSpec};

pub const MODEL_MAGIC: &[u8; 8] = b"EMGCNN1\0";

fn shell(spec: NetworkSpec) -> Network {
    let k = spec.kernel;
    let mut conv = Vec::with_capacity(4);
    let mut in_ch = spec.input_channels;
    for &out_ch in &spec.block_channels {
        conv.push(ConvLayer {
            in_ch,
            out_ch,
            kernel: k,
            weights: vec![0.0; out_ch * in_ch * k * k],
            bias: vec![0.0; out_ch],
        });
        in_ch = out_ch;
    }
    let feat_dim = spec.block_channels[3];
    let dense1 = DenseLayer {
        in_dim: feat_dim,
        out_dim: spec.dense_units,
        weights: vec![0.0; spec.dense_units * feat_dim],
        bias: vec![0.0; spec.dense_units],
    };
    let dense2 = DenseLayer {
        in_dim: spec.dense_units,
        out_dim: spec.classes,
        weights: vec![0.0; spec.classes * spec.dense_units],
        bias: vec![0.0; spec.classes],
    };
    let conv: [ConvLayer; 4] = conv.try_into().expect("four blocks");
    Network {
        spec,
        conv,
        dense1,
        dense2,
    }
}

pub fn save_model(path: &Path, net: &Network) -> Result<(), DataError> {
    let p = path.display().to_string();
    let header = serde_json::to_string(&net.spec).expect("spec serializes");
    let mut bytes = Vec::with_capacity(16 + header.len() + 4 * net.num_params());
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(header.as_bytes());
    bytes.push(b'\n');
    for slice in net.param_slices() {
        for &v in slice {
            if !v.is_finite() {
                return Err(DataError::Malformed {
                    path: p.clone(),
                    detail: "refusing to save non-finite parameter".into(),
                });
            }
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Network, DataError> {
    let p = path.display().to_string();
    let bytes = fs::read(path)?;
    if bytes.len() < MODEL_MAGIC.len() || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(DataError::BadMagic { path: p.clone() });
    }
    let rest = &bytes[MODEL_MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DataError::Malformed {
            path: p.clone(),
            detail: "missing header line".into(),
        })?;
    let spec: NetworkSpec =
        serde_json::from_slice(&rest[..nl]).map_err(|e| DataError::Malformed {
            path: p.clone(),
            detail: format!("bad header: {}", e),
        })?;
    spec.validate().map_err(|e| DataError::Malformed {
        path: p.clone(),
        detail: format!("header describes an invalid network: {}", e),
    })?;

    let mut net = shell(spec);
    let expected = 4 * net.num_params();
    let payload = &rest[nl + 1..];
    if payload.len() < expected {
        return Err(DataError::Truncated { path: p.clone() });
    }
    if payload.len() > expected {
        return Err(DataError::HeaderMismatch {
            path: p.clone(),
            detail: format!(
                "{} trailing bytes after {} parameter bytes",
                payload.len() - expected,
                expected
            ),
        });
    }
    let mut off = 0;
    for slice in net.param_slices_mut() {
        for v in slice.iter_mut() {
            let raw = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap());
            if !raw.is_finite() {
                return Err(DataError::Malformed {
                    path: p.clone(),
                    detail: "non-finite parameter value".into(),
                });
            }
            *v = raw as f64;
            off += 4;
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_network, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = build_network(125, 3, 42).unwrap();
        save_model(&path, &net).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(net.spec, loaded.spec);
        assert_eq!(net.param_slices(), loaded.param_slices());
        // Same predictions on a random frame, down to the bit.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::from_data(
            1,
            32,
            125,
            (0..32 * 125).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        assert_eq!(net.forward_eval(&x).probs, loaded.forward_eval(&x).probs);
    }

    #[test]
    fn saves_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
        let net = build_network(150, 5, 7).unwrap();
        save_model(&p1, &net).unwrap();
        save_model(&p2, &net).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        std::fs::write(&path, b"NOTMODEL....").unwrap();
        assert!(matches!(load_model(&path), Err(DataError::BadMagic { .. })));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = build_network(125, 3, 1).unwrap();
        save_model(&path, &net).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(DataError::Truncated { .. })
        ));
    }

    #[test]
    fn rejects_trailing_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = build_network(125, 3, 1).unwrap();
        save_model(&path, &net).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 3]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(DataError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(b"{\"not\": \"a spec\"}\n");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(DataError::Malformed { .. })
        ));
    }
}

//! Flat little-endian weight dump: `LDNN1`, then per layer
//! `fan_in: u32, fan_out: u32`, row-major `f64` weights, `f64` biases.

use std::fs;
use std::path::Path;

use super::{DenseLayer, Matrix, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"LDNN1";

pub fn write_checkpoint(network: &Network) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for layer in network.layers() {
        out.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
        for w in layer.weights.as_slice() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    let bad = |msg: String| Error::usage(format!("invalid checkpoint: {msg}"));
    let mut rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| bad("missing LDNN1 header".into()))?;
    let mut raw = Vec::new();
    while !rest.is_empty() {
        if rest.len() < 8 {
            return Err(bad(format!(
                "truncated layer header ({} bytes left)",
                rest.len()
            )));
        }
        let fan_in = u32::from_le_bytes(rest[0..4].try_into().unwrap()) as usize;
        let fan_out = u32::from_le_bytes(rest[4..8].try_into().unwrap()) as usize;
        rest = &rest[8..];
        let need = (fan_in * fan_out + fan_out) * 8;
        if rest.len() < need {
            return Err(bad(format!(
                "layer {} needs {need} bytes, {} left",
                raw.len(),
                rest.len()
            )));
        }
        let mut values = rest[..need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let weights: Vec<f64> = values.by_ref().take(fan_in * fan_out).collect();
        let bias: Vec<f64> = values.collect();
        rest = &rest[need..];
        raw.push((Matrix::from_vec(fan_out, fan_in, weights)?, bias));
    }
    let n = raw.len();
    let layers = raw
        .into_iter()
        .enumerate()
        .map(|(l, (w, b))| DenseLayer::new(w, b, l + 1 < n))
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

pub fn save_checkpoint(network: &Network, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(network)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn round_trip_is_bitwise() {
        let net = init_network(&[7, 3], 5, 4, 12).unwrap();
        let bytes = write_checkpoint(&net);
        assert_eq!(&bytes[..5], b"LDNN1");
        assert_eq!(bytes.len(), 5 + 3 * 8 + 8 * net.parameter_count());
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_damage() {
        let net = init_network(&[2], 2, 2, 0).unwrap();
        let bytes = write_checkpoint(&net);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_checkpoint(b"LDNN2").is_err());
        assert!(read_checkpoint(b"LDNN1").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = init_network(&[3], 4, 2, 8).unwrap();
        save_checkpoint(&net, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), net);
    }
}

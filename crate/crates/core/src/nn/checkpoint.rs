//! Network checkpoints: a JSON shape manifest plus a flat tensor blob.
//!
//! `<stem>.json`:
//!
//! ```json
//! {
//!   "format": "pdiff-mlp",
//!   "version": 1,
//!   "dtype": "f64-le",
//!   "activation": "relu",
//!   "layer_dims": [784, 256, 10],
//!   "tensors": [
//!     {"name": "layers.0.weight", "shape": [784, 256], "offset": 0},
//!     {"name": "layers.0.bias", "shape": [256], "offset": 200704},
//!     ...
//!   ]
//! }
//! ```
//!
//! `<stem>.bin` holds every tensor back to back as little-endian IEEE-754
//! doubles, row-major. `offset` counts elements (not bytes) from the start of
//! the blob. Weights are stored `in x out`, so a layer computes `x W + b`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::{Activation, Dense, Network};
use crate::error::{Error, Result};

const FORMAT: &str = "pdiff-mlp";
const VERSION: u32 = 1;
const DTYPE: &str = "f64-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub activation: Activation,
    pub layer_dims: Vec<usize>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

pub fn encode(net: &Network) -> (Manifest, Vec<u8>) {
    let mut tensors = Vec::new();
    let mut blob = Vec::with_capacity(net.parameter_count() * 8);
    let mut offset = 0;
    for (i, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = layer.weight.dim();
        tensors.push(TensorEntry {
            name: format!("layers.{i}.weight"),
            shape: vec![rows, cols],
            offset,
        });
        offset += rows * cols;
        tensors.push(TensorEntry {
            name: format!("layers.{i}.bias"),
            shape: vec![cols],
            offset,
        });
        offset += cols;
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        dtype: DTYPE.into(),
        activation: net.activation(),
        layer_dims: net.layer_dims(),
        tensors,
    };
    (manifest, blob)
}

pub fn decode(manifest: &Manifest, blob: &[u8]) -> Result<Network> {
    if manifest.format != FORMAT || manifest.version != VERSION || manifest.dtype != DTYPE {
        return Err(Error::Format(format!(
            "unsupported checkpoint {} v{} ({})",
            manifest.format, manifest.version, manifest.dtype
        )));
    }
    if !blob.len().is_multiple_of(8) {
        return Err(Error::Format("tensor blob length is not a multiple of 8".into()));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let dims = &manifest.layer_dims;
    if dims.len() < 2 || manifest.tensors.len() != 2 * (dims.len() - 1) {
        return Err(Error::Format("manifest tensor list does not match layer_dims".into()));
    }
    let slice = |entry: &TensorEntry, expected: &[usize]| -> Result<Vec<f64>> {
        if entry.shape != expected {
            return Err(Error::Format(format!(
                "tensor {} has shape {:?}, expected {:?}",
                entry.name, entry.shape, expected
            )));
        }
        let len: usize = expected.iter().product();
        values
            .get(entry.offset..entry.offset + len)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Format(format!("tensor {} runs past the blob", entry.name)))
    };
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, pair) in dims.windows(2).enumerate() {
        let w = slice(&manifest.tensors[2 * i], &[pair[0], pair[1]])?;
        let b = slice(&manifest.tensors[2 * i + 1], &[pair[1]])?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((pair[0], pair[1]), w)
                .map_err(|e| Error::Format(e.to_string()))?,
            bias: Array1::from(b),
        });
    }
    Network::from_layers(layers, manifest.activation)
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`.
pub fn save_checkpoint(net: &Network, dir: &Path, stem: &str) -> Result<()> {
    let (manifest, blob) = encode(net);
    let json_path = dir.join(format!("{stem}.json"));
    let bin_path = dir.join(format!("{stem}.bin"));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    std::fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))?;
    Ok(())
}

/// Loads a checkpoint from its manifest path; the blob sits next to it with
/// a `.bin` extension.
pub fn load_checkpoint(manifest_path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("checkpoint manifest: {e}")))?;
    let bin_path = manifest_path.with_extension("bin");
    let blob = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    decode(&manifest, &blob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = init_network(&[6, 5, 3], Activation::Tanh, 4).unwrap();
        save_checkpoint(&net, dir.path(), "model").unwrap();
        let back = load_checkpoint(&dir.path().join("model.json")).unwrap();
        assert_eq!(back, net);
        let blob = std::fs::read(dir.path().join("model.bin")).unwrap();
        assert_eq!(blob.len(), net.parameter_count() * 8);
    }

    #[test]
    fn bad_manifest_is_a_format_error() {
        let net = init_network(&[2, 2], Activation::Relu, 4).unwrap();
        let (mut manifest, blob) = encode(&net);
        manifest.tensors[0].shape = vec![3, 2];
        assert!(matches!(decode(&manifest, &blob), Err(Error::Format(_))));
        let (manifest, blob) = encode(&net);
        assert!(decode(&manifest, &blob[..blob.len() - 8]).is_err());
    }
}

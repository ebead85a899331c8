//! Binary checkpoint format for network parameters.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   7 bytes  "RCNAV1\0"
//! version u8       1
//! count   u8       number of networks
//! per network:
//!   tag_len u8, tag bytes (ASCII role tag, e.g. "actor")
//!   layer_count u32
//!   dims (layer_count + 1) x u32
//!   per layer: out*in f32 weights (row-major), then out f32 biases
//! ```
//!
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::nn::{Linear, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"RCNAV1\0";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub fn save_networks(path: &Path, nets: &[(&str, &Mlp<f32>)]) -> Result<(), CheckpointError> {
    assert!(nets.len() <= u8::MAX as usize);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION, nets.len() as u8])?;
    for (tag, net) in nets {
        let tag_bytes = tag.as_bytes();
        assert!(tag_bytes.len() <= u8::MAX as usize && tag.is_ascii(), "role tag must be short ASCII");
        w.write_all(&[tag_bytes.len() as u8])?;
        w.write_all(tag_bytes)?;
        let dims = net.dims();
        w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
        for d in &dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for layer in net.layers() {
            for v in layer.weights.iter().chain(&layer.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_networks(path: &Path) -> Result<Vec<(String, Mlp<f32>)>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(head[0]));
    }
    let count = head[1] as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut len = [0u8; 1];
        r.read_exact(&mut len)?;
        let mut tag = vec![0u8; len[0] as usize];
        r.read_exact(&mut tag)?;
        let tag = String::from_utf8(tag)
            .map_err(|_| CheckpointError::Corrupt("non-UTF8 role tag".into()))?;
        let layer_count = read_u32(&mut r)? as usize;
        if layer_count == 0 || layer_count > 64 {
            return Err(CheckpointError::Corrupt(format!("layer count {layer_count}")));
        }
        let dims: Vec<usize> = (0..=layer_count)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        if dims.iter().any(|&d| d == 0 || d > 1 << 20) {
            return Err(CheckpointError::Corrupt(format!("layer dims {dims:?}")));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for pair in dims.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let weights = read_f32s(&mut r, in_dim * out_dim)?;
            let bias = read_f32s(&mut r, out_dim)?;
            layers.push(Linear { weights, bias, in_dim, out_dim });
        }
        out.push((tag, Mlp::from_layers(layers)));
    }
    Ok(out)
}

/// Load the network stored under `tag`.
pub fn load_network(path: &Path, tag: &str) -> Result<Mlp<f32>, CheckpointError> {
    load_networks(path)?
        .into_iter()
        .find(|(t, _)| t == tag)
        .map(|(_, net)| net)
        .ok_or_else(|| CheckpointError::Corrupt(format!("no network tagged '{tag}'")))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>, CheckpointError> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::flatten_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Mlp::<f32>::new(&[46, 256, 256, 2], &mut rng);
        let c = Mlp::<f32>::new(&[48, 256, 256, 1], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_networks(&path, &[("actor", &a), ("critic1", &c)]).unwrap();
        let loaded = load_networks(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "actor");
        assert_eq!(loaded[0].1.dims(), vec![46, 256, 256, 2]);
        let before: Vec<u32> = flatten_params(&a).iter().map(|v| v.to_bits()).collect();
        let after: Vec<u32> = flatten_params(&loaded[0].1).iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after, "round-trip must preserve every bit");
        assert_eq!(flatten_params(&c), flatten_params(&load_network(&path, "critic1").unwrap()));
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not_a_ckpt.bin");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        match load_networks(&path) {
            Err(CheckpointError::BadMagic) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn rejects_future_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.bin");
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&[9, 0]);
        std::fs::write(&path, bytes).unwrap();
        match load_networks(&path) {
            Err(CheckpointError::UnsupportedVersion(9)) => {}
            other => panic!("expected UnsupportedVersion, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_corrupt_not_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Mlp::<f32>::new(&[4, 8, 2], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.bin");
        save_networks(&path, &[("actor", &a)]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(load_networks(&path).is_err());
    }
}

//! Binary checkpoint format.
//!
//! ```text
//! "RLB1"            4 bytes magic
//! version           u32
//! tensor count      u32
//! per tensor:
//!   name length     u16, then UTF-8 name
//!   ndim            u8,  then u32 dims[ndim]
//!   payload         f32 × Π dims
//! ```
//!
//! All integers and floats are little-endian. The architecture travels as
//! three extra tensors (`config.input`, `config.classes`, `config.layers`)
//! holding small integers, so the format stays a plain list of tensors.

use std::path::Path;

use crate::error::{CheckpointError, Error, Result};
use crate::fsutil;
use crate::model::ModelConfig;
use crate::nn::{LayerSpec, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RLB1";
pub const VERSION: u32 = 1;

const LAYER_FIELDS: usize = 5;

/// A model architecture with its learned parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub version: u32,
    pub config: ModelConfig,
    pub params: Params<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(config: ModelConfig, params: Params<T>) -> Self {
        Self { version: VERSION, config, params }
    }
}

fn encode_layer(spec: &LayerSpec) -> [usize; LAYER_FIELDS] {
    match *spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, padding } => [0, in_channels, out_channels, kernel, padding],
        LayerSpec::Relu => [1, 0, 0, 0, 0],
        LayerSpec::MaxPool2 => [2, 0, 0, 0, 0],
        LayerSpec::Flatten => [3, 0, 0, 0, 0],
        LayerSpec::Dense { in_features, out_features } => [4, in_features, out_features, 0, 0],
    }
}

fn decode_layer(row: &[usize]) -> Result<LayerSpec, CheckpointError> {
    Ok(match row[0] {
        0 => LayerSpec::Conv2d { in_channels: row[1], out_channels: row[2], kernel: row[3], padding: row[4] },
        1 => LayerSpec::Relu,
        2 => LayerSpec::MaxPool2,
        3 => LayerSpec::Flatten,
        4 => LayerSpec::Dense { in_features: row[1], out_features: row[2] },
        k => return Err(CheckpointError::Malformed(format!("unknown layer kind code {k}"))),
    })
}

fn int_tensor(shape: Vec<usize>, values: impl IntoIterator<Item = usize>) -> Tensor<f32> {
    Tensor::new(shape, values.into_iter().map(|v| v as f32).collect()).expect("consistent config tensor")
}

fn push_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.ndim() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a checkpoint; parameters are stored as `f32`.
pub fn encode_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>) -> Vec<u8> {
    let cfg = &ckpt.config;
    let mut tensors: Vec<(String, Tensor<f32>)> = vec![
        ("config.input".into(), int_tensor(vec![3], cfg.input)),
        ("config.classes".into(), int_tensor(vec![1], [cfg.classes])),
    ];
    if !cfg.layers.is_empty() {
        let codes = cfg.layers.iter().flat_map(encode_layer);
        tensors.push(("config.layers".into(), int_tensor(vec![cfg.layers.len(), LAYER_FIELDS], codes)));
    }
    for (name, t) in ckpt.params.named() {
        tensors.push((name, t.cast()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ckpt.version.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        push_tensor(&mut out, name, t);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_tensors(bytes: &[u8]) -> Result<(u32, Vec<(String, Tensor<f32>)>), CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: VERSION });
    }
    let count = r.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if shape.is_empty() || shape.contains(&0) {
            return Err(CheckpointError::Malformed(format!("tensor {name} has shape {shape:?}")));
        }
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(CheckpointError::Truncated)?;
        let payload = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated)?)?;
        let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        tensors.push((name, Tensor::new(shape, data).expect("length checked")));
    }
    Ok((version, tensors))
}

fn ints(t: &Tensor<f32>, name: &str) -> Result<Vec<usize>, CheckpointError> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < 16_777_216.0 {
                Ok(v as usize)
            } else {
                Err(CheckpointError::Malformed(format!("{name} holds non-integer value {v}")))
            }
        })
        .collect()
}

/// Parses a checkpoint produced by [`encode_checkpoint`].
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let (version, tensors) = read_tensors(bytes)?;
    let find = |name: &str| tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t);
    let missing = |name: &str| CheckpointError::Malformed(format!("missing tensor {name}"));

    let input = ints(find("config.input").ok_or_else(|| missing("config.input"))?, "config.input")?;
    let input: [usize; 3] =
        input.try_into().map_err(|_| CheckpointError::Malformed("config.input must hold 3 values".into()))?;
    let classes = ints(find("config.classes").ok_or_else(|| missing("config.classes"))?, "config.classes")?;
    let classes = *classes.first().ok_or_else(|| missing("config.classes"))?;
    let layers = match find("config.layers") {
        Some(t) => {
            if t.ndim() != 2 || t.shape()[1] != LAYER_FIELDS {
                return Err(CheckpointError::Malformed("config.layers must be [L, 5]".into()).into());
            }
            ints(t, "config.layers")?.chunks(LAYER_FIELDS).map(decode_layer).collect::<Result<Vec<_>, _>>()?
        }
        None => Vec::new(),
    };
    let config = ModelConfig { input, classes, layers };

    let mut params = Params::<T>::zeros(&config.layers);
    for (i, slot) in params.layers.iter_mut().enumerate() {
        if let Some(p) = slot {
            for (suffix, dst) in [("weight", &mut p.weight), ("bias", &mut p.bias)] {
                let name = format!("layer{i}.{suffix}");
                let src = find(&name).ok_or_else(|| missing(&name))?;
                if src.shape() != dst.shape() {
                    return Err(Error::layer(
                        i,
                        format!("checkpoint tensor {name} has shape {:?}, expected {:?}", src.shape(), dst.shape()),
                    ));
                }
                *dst = src.cast();
            }
        }
    }
    Ok(Checkpoint { version, config, params })
}

pub fn save_checkpoint<T: Scalar>(path: &Path, ckpt: &Checkpoint<T>) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(ckpt))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    decode_checkpoint(&fsutil::read(path)?)
}

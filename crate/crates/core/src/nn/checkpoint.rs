//! Weight checkpoint files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic       8 bytes  "VSCKPT01"
//! version     u32      1
//! model_id    u32      0 = action, 1 = pouring, 2 = shaking
//! input rank  u32, then u32 dims
//! layer count u32
//!   per layer: kind u8, then kind-specific u32/f32 fields
//! tensor data f32 little-endian, weight then bias per parameterized
//!             layer, in layer order
//! ```
//!
//! Round trips are bit-exact: the f32 payload is written and read as raw
//! IEEE bit patterns.

use super::layer::{Layer, PoolPadding};
use super::network::Network;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"VSCKPT01";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown layer kind tag {tag} at layer {layer}")]
    UnknownLayer { layer: usize, tag: u8 },
    #[error("checkpoint does not describe a valid network: {0}")]
    InvalidNetwork(String),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
    fn f32(&mut self) -> Result<f32, CheckpointError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn push_layer(buf: &mut Vec<u8>, layer: &Layer) {
    match *layer {
        Layer::Conv2d { in_channels, out_channels } => {
            buf.push(1);
            buf.extend_from_slice(&(in_channels as u32).to_le_bytes());
            buf.extend_from_slice(&(out_channels as u32).to_le_bytes());
        }
        Layer::MaxPool2d { padding } => {
            buf.push(2);
            buf.push(match padding {
                PoolPadding::Same => 0,
                PoolPadding::Valid => 1,
            });
        }
        Layer::Dense { in_features, out_features } => {
            buf.push(3);
            buf.extend_from_slice(&(in_features as u32).to_le_bytes());
            buf.extend_from_slice(&(out_features as u32).to_le_bytes());
        }
        Layer::Relu => buf.push(4),
        Layer::Softmax => buf.push(5),
        Layer::Dropout { keep } => {
            buf.push(6);
            buf.extend_from_slice(&keep.to_le_bytes());
        }
        Layer::Flatten => buf.push(7),
    }
}

fn read_layer(r: &mut Reader, idx: usize) -> Result<Layer, CheckpointError> {
    let tag = r.u8()?;
    Ok(match tag {
        1 => Layer::Conv2d { in_channels: r.u32()? as usize, out_channels: r.u32()? as usize },
        2 => Layer::MaxPool2d {
            padding: if r.u8()? == 0 { PoolPadding::Same } else { PoolPadding::Valid },
        },
        3 => Layer::Dense { in_features: r.u32()? as usize, out_features: r.u32()? as usize },
        4 => Layer::Relu,
        5 => Layer::Softmax,
        6 => Layer::Dropout { keep: r.f32()? },
        7 => Layer::Flatten,
        tag => return Err(CheckpointError::UnknownLayer { layer: idx, tag }),
    })
}

pub fn encode(net: &Network<f32>, model_id: u32) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&model_id.to_le_bytes());
    buf.extend_from_slice(&(net.input_shape().len() as u32).to_le_bytes());
    for &d in net.input_shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        push_layer(&mut buf, layer);
    }
    for params in net.params().iter().flatten() {
        for &v in params.weight.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in params.bias.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode(bytes: &[u8]) -> Result<(Network<f32>, u32), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let model_id = r.u32()?;
    let rank = r.u32()? as usize;
    let mut input_shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        input_shape.push(r.u32()? as usize);
    }
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for idx in 0..n_layers {
        layers.push(read_layer(&mut r, idx)?);
    }
    let mut net = Network::<f32>::new(layers, &input_shape)
        .map_err(|e| CheckpointError::InvalidNetwork(e.to_string()))?;
    for params in net.params_mut().iter_mut().flatten() {
        for v in params.weight.data_mut() {
            *v = r.f32()?;
        }
        for v in params.bias.data_mut() {
            *v = r.f32()?;
        }
    }
    Ok((net, model_id))
}

pub fn save(path: &Path, net: &Network<f32>, model_id: u32) -> Result<(), CheckpointError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode(net, model_id))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Network<f32>, u32), CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

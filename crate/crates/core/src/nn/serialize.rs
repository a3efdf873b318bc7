//! Versioned binary layout for parameter snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"FSNN"
//! format  u32 = 1
//! layers  u32
//! per layer:
//!   out_dim     u32
//!   in_dim      u32
//!   activation  u8 (0 = relu, 1 = tanh, 2 = identity)
//!   weights     out_dim * in_dim f64, row-major
//!   biases      out_dim f64
//! ```
//!
//! Round-trips are bit-exact for `f64` parameters.

use crate::error::{Error, Result};
use crate::nn::mlp::{ActivationKind, ModelParams, ParamLayer};
use crate::nn::Matrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FSNN";
const FORMAT_VERSION: u32 = 1;

/// Serialized byte length of a snapshot without materializing it.
pub fn params_byte_len<S: Scalar>(params: &ModelParams<S>) -> usize {
    let per_layer: usize = params
        .layers
        .iter()
        .map(|l| 4 + 4 + 1 + 8 * (l.weights.data().len() + l.biases.len()))
        .sum();
    4 + 4 + 4 + per_layer
}

/// Appends the serialized snapshot to `out`.
pub fn write_params<S: Scalar>(params: &ModelParams<S>, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for layer in &params.layers {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        out.push(layer.activation.tag());
        for &w in layer.weights.data() {
            out.extend_from_slice(&w.to_f64().expect("finite").to_le_bytes());
        }
        for &b in &layer.biases {
            out.extend_from_slice(&b.to_f64().expect("finite").to_le_bytes());
        }
    }
}

pub fn params_to_bytes<S: Scalar>(params: &ModelParams<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(params_byte_len(params));
    write_params(params, &mut out);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.offset + len > self.bytes.len() {
            return Err(Error::format(
                self.offset,
                format!("truncated while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

/// Parses a snapshot; errors carry the byte offset of the failure.
pub fn params_from_bytes<S: Scalar>(bytes: &[u8]) -> Result<ModelParams<S>> {
    let mut r = Reader { bytes, offset: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}")));
    }
    let version_offset = r.offset;
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            version_offset,
            format!("unsupported format version {version}"),
        ));
    }
    let layer_count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let out_dim = r.u32("out_dim")? as usize;
        let in_dim = r.u32("in_dim")? as usize;
        let act_offset = r.offset;
        let tag = r.u8("activation")?;
        let activation = ActivationKind::from_tag(tag)
            .ok_or_else(|| Error::format(act_offset, format!("unknown activation tag {tag}")))?;
        let mut weights = Vec::with_capacity(out_dim * in_dim);
        for _ in 0..out_dim * in_dim {
            weights.push(S::from_f64_lossy(r.f64("weight")?));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            biases.push(S::from_f64_lossy(r.f64("bias")?));
        }
        layers.push(ParamLayer {
            weights: Matrix::from_vec(out_dim, in_dim, weights)?,
            biases,
            activation,
        });
    }
    if r.offset != bytes.len() {
        return Err(Error::format(r.offset, "trailing bytes".to_string()));
    }
    Ok(ModelParams { layers })
}

//! IDX image/label codec (the MNIST container format).
//!
//! Images use magic `0x00000803` with three big-endian u32 dimension
//! fields (count, rows, cols); labels use magic `0x00000801` with one.
//! Pixels are unsigned bytes, scaled here into `[0, 1]` by `/255`.

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if end > bytes.len() {
        return Err(Error::format(
            offset.min(bytes.len()),
            format!("truncated while reading {what}"),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses an IDX3 image buffer and its IDX1 label buffer into a dataset.
///
/// Image rows are flattened (rows x cols per image); the class count is
/// inferred as `max label + 1`.
pub fn load_idx<S: Scalar>(images_bytes: &[u8], labels_bytes: &[u8]) -> Result<Dataset<S>> {
    let magic = read_u32_be(images_bytes, 0, "image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(0, format!("bad image magic {magic:#010x}")));
    }
    let count = read_u32_be(images_bytes, 4, "image count")? as usize;
    let rows = read_u32_be(images_bytes, 8, "image rows")? as usize;
    let cols = read_u32_be(images_bytes, 12, "image cols")? as usize;
    let pixels = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
    if images_bytes.len() < 16 + pixels {
        return Err(Error::format(
            images_bytes.len(),
            format!("truncated image payload: need {} bytes", 16 + pixels),
        ));
    }
    if images_bytes.len() > 16 + pixels {
        return Err(Error::format(16 + pixels, "trailing bytes after image payload"));
    }

    let label_magic = read_u32_be(labels_bytes, 0, "label magic")?;
    if label_magic != LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic {label_magic:#010x}"),
        ));
    }
    let label_count = read_u32_be(labels_bytes, 4, "label count")? as usize;
    if label_count != count {
        return Err(Error::format(
            4,
            format!("{count} images but {label_count} labels"),
        ));
    }
    if labels_bytes.len() < 8 + count {
        return Err(Error::format(
            labels_bytes.len(),
            format!("truncated label payload: need {} bytes", 8 + count),
        ));
    }

    let scale = S::from_f64_lossy(1.0 / 255.0);
    let data = images_bytes[16..16 + pixels]
        .iter()
        .map(|&b| S::from_f64_lossy(b as f64) * scale)
        .collect();
    let labels: Vec<usize> = labels_bytes[8..8 + count].iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    Dataset::new(Matrix::from_vec(count, rows * cols, data)?, labels, num_classes)
}

/// Serializes a dataset back to the IDX pair (images as 1 x dim "rows").
///
/// Features are quantized to bytes with `round(v * 255)`, so a round trip
/// reproduces the quantized values exactly.
pub fn write_idx<S: Scalar>(ds: &Dataset<S>) -> Result<(Vec<u8>, Vec<u8>)> {
    if ds.num_classes > 256 {
        return Err(Error::Data(
            "IDX labels are bytes; more than 256 classes cannot be encoded".to_string(),
        ));
    }
    let mut images = Vec::with_capacity(16 + ds.len() * ds.dim());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    images.extend_from_slice(&1u32.to_be_bytes());
    images.extend_from_slice(&(ds.dim() as u32).to_be_bytes());
    for &v in ds.features.data() {
        let scaled = (v.to_f64().unwrap_or(0.0) * 255.0).round().clamp(0.0, 255.0);
        images.push(scaled as u8);
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    labels.extend(ds.labels.iter().map(|&l| l as u8));
    Ok((images, labels))
}

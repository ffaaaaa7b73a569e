//! IDX (MNIST) archives: big-endian magic, big-endian u32 dimensions, then
//! unsigned bytes.

use std::path::Path;

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::model::Sample;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` bytes, image-major then row-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::IdxTruncated {
            needed: at + 4,
            have: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::IdxMagic { expected, found });
    }
    Ok(())
}

pub fn decode_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let needed = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_add(16))
        .unwrap_or(usize::MAX);
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            needed,
            have: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..needed].to_vec(),
    })
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let needed = count.saturating_add(8);
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            needed,
            have: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Builds a classification dataset: pixels scaled to `[0, 1]`, labels one-hot
/// over 10 classes.
pub fn idx_to_dataset(name: &str, images: &IdxImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let mut samples = Vec::with_capacity(images.count);
    for (i, &label) in labels.iter().enumerate() {
        if label > 9 {
            return Err(Error::IdxLabel(label));
        }
        let x = images.image(i).iter().map(|&p| f64::from(p) / 255.0).collect();
        let mut y = vec![0.0; 10];
        y[label as usize] = 1.0;
        samples.push(Sample::new(x, y));
    }
    Ok(Dataset::new(name, Task::Classification, samples))
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let ib = std::fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let lb = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
    let name = ip
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    idx_to_dataset(&name, &decode_idx_images(&ib)?, &decode_idx_labels(&lb)?)
}

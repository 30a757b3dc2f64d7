//! IDX (MNIST) image/label file pairs.
//!
//! ```text
//! images: 0x00000803  count  rows  cols  | count*rows*cols u8 pixels
//! labels: 0x00000801  count              | count u8 labels
//! ```
//!
//! All header words are big-endian u32. Paths ending in `.gz` are
//! decompressed transparently.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;
    parse_idx(&images, &labels).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(images_path, source),
        other => other,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

/// Parses in-memory IDX image and label files.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let mut img = Cursor::new(images, "images");
    let magic = img.u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images file magic 0x{magic:08X}, expected 0x{IMAGES_MAGIC:08X}"
        )));
    }
    let count = img.u32()? as usize;
    let rows = img.u32()? as usize;
    let cols = img.u32()? as usize;

    let mut lab = Cursor::new(labels, "labels");
    let magic = lab.u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels file magic 0x{magic:08X}, expected 0x{LABELS_MAGIC:08X}"
        )));
    }
    let label_count = lab.u32()? as usize;
    if label_count != count {
        return Err(Error::Consistency(format!(
            "{count} images but {label_count} labels"
        )));
    }

    let dim = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("image size {rows}x{cols} overflows")))?;
    let total = count
        .checked_mul(dim)
        .ok_or_else(|| Error::Format(format!("{count} images of {dim} pixels overflows")))?;
    let pixels = img.take(total)?;
    let label_bytes = lab.take(count)?;

    let features = Array2::from_shape_vec(
        (count, dim),
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    if let Some(bad) = labels.iter().find(|&&y| y >= MNIST_CLASSES) {
        return Err(Error::Format(format!("label {bad} outside [0, 10)")));
    }
    LabeledDataset::new(features, labels, MNIST_CLASSES)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Cursor { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::io(
                self.what,
                std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    format!(
                        "{} file truncated: need {} bytes, have {}",
                        self.what,
                        end,
                        self.bytes.len()
                    ),
                ),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

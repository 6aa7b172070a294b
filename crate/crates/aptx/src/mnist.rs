//! IDX-format MNIST ingestion, normalization, and batch iteration.
//!
//! The loader accepts both raw and gzipped IDX files. Big-endian
//! header: magic, then one u32 per dimension, then the byte payload.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};
use flate2::read::GzDecoder;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

fn format_err(path: &Path, reason: String) -> Error {
    Error::DataFormat {
        path: path.display().to_string(),
        reason,
    }
}

/// Whole file, gunzipped if it starts with the gzip magic.
fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| format_err(path, format!("gzip decode failed: {e}")))?;
        return Ok(out);
    }
    Ok(raw)
}

fn read_header(path: &Path, bytes: &[u8], expected_magic: u32, ndims: usize) -> Result<Vec<usize>> {
    if bytes.len() < 4 {
        return Err(format_err(
            path,
            format!("file is {} bytes, too short for a magic number", bytes.len()),
        ));
    }
    let magic = BigEndian::read_u32(&bytes[0..4]);
    if magic != expected_magic {
        return Err(format_err(
            path,
            format!("bad magic 0x{magic:08X}, expected 0x{expected_magic:08X}"),
        ));
    }
    let header_len = 4 * (1 + ndims);
    if bytes.len() < header_len {
        return Err(format_err(
            path,
            format!("file is {} bytes, header alone needs {header_len}", bytes.len()),
        ));
    }
    Ok((0..ndims)
        .map(|d| BigEndian::read_u32(&bytes[4 * (d + 1)..4 * (d + 2)]) as usize)
        .collect())
}

/// Raw image bytes in file order, one row of 784 pixels per image.
pub fn load_idx_images(path: &Path) -> Result<(Vec<u8>, usize)> {
    let bytes = read_maybe_gzip(path)?;
    let dims = read_header(path, &bytes, IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(format_err(
            path,
            format!("image dims {rows}x{cols}, expected {IMAGE_SIDE}x{IMAGE_SIDE}"),
        ));
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload is {} bytes, header declares {expected}", bytes.len()),
        ));
    }
    Ok((bytes[16..].to_vec(), count))
}

/// Label bytes, each validated to be a digit class.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gzip(path)?;
    let dims = read_header(path, &bytes, LABEL_MAGIC, 1)?;
    let count = dims[0];
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload is {} bytes, header declares {expected}", bytes.len()),
        ));
    }
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(format_err(path, format!("label byte {bad} out of range [0, 9]")));
    }
    Ok(labels)
}

/// IDX writers, mainly for fixtures and synthetic runs.
pub fn write_idx_images(path: &Path, images: &[u8]) -> Result<()> {
    assert_eq!(images.len() % IMAGE_PIXELS, 0);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    w.write_u32::<BigEndian>((images.len() / IMAGE_PIXELS) as u32)?;
    w.write_u32::<BigEndian>(IMAGE_SIDE as u32)?;
    w.write_u32::<BigEndian>(IMAGE_SIDE as u32)?;
    w.write_all(images)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(LABEL_MAGIC)?;
    w.write_u32::<BigEndian>(labels.len() as u32)?;
    w.write_all(labels)?;
    Ok(())
}

/// Loaded split: normalized pixels, one sample per row.
#[derive(Debug, Clone)]
pub struct Dataset<F: Float> {
    pub images: Matrix<F>,
    pub labels: Vec<usize>,
}

impl<F: Float> Dataset<F> {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    /// Rows and labels at the given indices, in order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix<F>, Vec<usize>) {
        let cols = self.images.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &idx in indices {
            data.extend_from_slice(self.images.row(idx));
            labels.push(self.labels[idx]);
        }
        (Matrix::new(indices.len(), cols, data).unwrap(), labels)
    }
}

/// Pixel byte to real. Plain /255 scaling by default; the optional
/// standardization subtracts the usual MNIST mean/std after scaling.
pub fn normalize<F: Float>(byte: u8, standardize: bool) -> F {
    let v = byte as f64 / 255.0;
    let v = if standardize { (v - 0.1307) / 0.3081 } else { v };
    F::from(v).unwrap()
}

/// Assemble a dataset from paired image/label files.
pub fn load_dataset<F: Float>(
    images_path: &Path,
    labels_path: &Path,
    standardize: bool,
) -> Result<Dataset<F>> {
    let (pixels, count) = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if labels.len() != count {
        return Err(format_err(
            labels_path,
            format!("{} labels for {count} images", labels.len()),
        ));
    }
    let data = pixels.iter().map(|&b| normalize(b, standardize)).collect();
    Ok(Dataset {
        images: Matrix::new(count, IMAGE_PIXELS, data)?,
        labels: labels.into_iter().map(usize::from).collect(),
    })
}

/// Resolve one of the four canonical files inside `data_dir`, preferring
/// the raw name and falling back to the `.gz` variant.
pub fn resolve_file(data_dir: &Path, stem: &str) -> Result<PathBuf> {
    let raw = data_dir.join(stem);
    if raw.exists() {
        return Ok(raw);
    }
    let gz = data_dir.join(format!("{stem}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(Error::DataFormat {
        path: raw.display().to_string(),
        reason: format!("missing data file (also tried {})", gz.display()),
    })
}

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

pub fn load_train<F: Float>(data_dir: &Path, standardize: bool) -> Result<Dataset<F>> {
    load_dataset(
        &resolve_file(data_dir, TRAIN_IMAGES)?,
        &resolve_file(data_dir, TRAIN_LABELS)?,
        standardize,
    )
}

pub fn load_test<F: Float>(data_dir: &Path, standardize: bool) -> Result<Dataset<F>> {
    load_dataset(
        &resolve_file(data_dir, TEST_IMAGES)?,
        &resolve_file(data_dir, TEST_LABELS)?,
        standardize,
    )
}

/// Index batches for one epoch. With `shuffle`, a Fisher-Yates
/// permutation drawn from `rng`; otherwise file order. The last batch
/// may be smaller; nothing is dropped.
pub fn epoch_batches(
    num_samples: usize,
    batch_size: usize,
    rng: &mut Rng,
    shuffle: bool,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..num_samples).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

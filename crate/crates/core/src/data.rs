//! Bit-vector datasets: MNIST in IDX format (binarized by threshold),
//! synthetic toy tasks, and a raw text format for external data.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: file truncated (need {need} bytes, have {have})")]
    Truncated {
        path: String,
        need: usize,
        have: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("unknown toy task `{0}` (expected xor2, parity3 or constant)")]
    UnknownTask(String),
    #[error("noise rate {0} out of range [0, 0.5)")]
    BadNoise(f64),
    #[error("raw data line {line}: {reason}")]
    BadRawLine { line: usize, reason: String },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Binarized labeled samples of a fixed bit width.
#[derive(Debug, Clone)]
pub struct Dataset {
    width: usize,
    num_classes: usize,
    split: Split,
    /// Flattened n x width bits, one byte per bit.
    bits: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        width: usize,
        num_classes: usize,
        split: Split,
        bits: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Dataset, DataError> {
        assert_eq!(bits.len(), width * labels.len());
        assert!(labels.iter().all(|&l| (l as usize) < num_classes));
        if labels.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Dataset {
            width,
            num_classes,
            split,
            bits,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn sample(&self, i: usize) -> &[u8] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Copies sample `i` into `out` as 0.0/1.0 reals.
    pub fn sample_as_f64(&self, i: usize, out: &mut [f64]) {
        for (o, &b) in out.iter_mut().zip(self.sample(i)) {
            *o = b as f64;
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_be_u32(data: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    let end = offset + 4;
    if data.len() < end {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            need: end,
            have: data.len(),
        });
    }
    Ok(u32::from_be_bytes([
        data[offset],
        data[offset + 1],
        data[offset + 2],
        data[offset + 3],
    ]))
}

/// Loads an MNIST-style IDX image/label file pair, binarizing pixels with
/// `bit = pixel > threshold`.
pub fn load_mnist(
    images_path: &Path,
    labels_path: &Path,
    threshold: u8,
    split: Split,
) -> Result<Dataset, DataError> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;

    let magic = read_be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            path: images_path.display().to_string(),
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let n_images = read_be_u32(&images, 4, images_path)? as usize;
    let rows = read_be_u32(&images, 8, images_path)? as usize;
    let cols = read_be_u32(&images, 12, images_path)? as usize;
    let width = rows * cols;
    let need = 16 + n_images * width;
    if images.len() < need {
        return Err(DataError::Truncated {
            path: images_path.display().to_string(),
            need,
            have: images.len(),
        });
    }

    let magic = read_be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            path: labels_path.display().to_string(),
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let n_labels = read_be_u32(&labels, 4, labels_path)? as usize;
    if labels.len() < 8 + n_labels {
        return Err(DataError::Truncated {
            path: labels_path.display().to_string(),
            need: 8 + n_labels,
            have: labels.len(),
        });
    }
    if n_images != n_labels {
        return Err(DataError::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }

    let mut bits = vec![0u8; n_images * width];
    for (bit, &pixel) in bits.iter_mut().zip(&images[16..16 + n_images * width]) {
        *bit = (pixel > threshold) as u8;
    }
    Dataset::new(width, 10, split, bits, labels[8..8 + n_labels].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyTask {
    Xor2,
    Parity3,
    Constant,
}

impl ToyTask {
    pub fn width(self) -> usize {
        match self {
            ToyTask::Xor2 | ToyTask::Constant => 2,
            ToyTask::Parity3 => 3,
        }
    }

    fn label(self, bits: &[u8]) -> u8 {
        match self {
            ToyTask::Xor2 => bits[0] ^ bits[1],
            ToyTask::Parity3 => bits[0] ^ bits[1] ^ bits[2],
            ToyTask::Constant => 0,
        }
    }
}

impl FromStr for ToyTask {
    type Err = DataError;

    fn from_str(s: &str) -> Result<ToyTask, DataError> {
        match s {
            "xor2" => Ok(ToyTask::Xor2),
            "parity3" => Ok(ToyTask::Parity3),
            "constant" => Ok(ToyTask::Constant),
            other => Err(DataError::UnknownTask(other.to_string())),
        }
    }
}

/// Builds a synthetic task: the input patterns cycle in order and labels
/// come from the named boolean function, flipped with probability
/// `noise`.
pub fn make_toy(task: ToyTask, n: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0..0.5).contains(&noise) {
        return Err(DataError::BadNoise(noise));
    }
    if n == 0 {
        return Err(DataError::Empty);
    }
    let width = task.width();
    let patterns = 1usize << width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let pattern = i % patterns;
        let sample: Vec<u8> = (0..width).map(|b| ((pattern >> b) & 1) as u8).collect();
        let mut label = task.label(&sample);
        if noise > 0.0 && rng.gen::<f64>() < noise {
            label ^= 1;
        }
        bits.extend_from_slice(&sample);
        labels.push(label);
    }
    Dataset::new(width, 2, Split::Train, bits, labels)
}

/// Parses the raw bit-vector text format: one `width,label,bits` line per
/// sample, `#` comments allowed, bit strings read left to right as input
/// bit 0 upward.
pub fn parse_raw(text: &str, split: Split) -> Result<Dataset, DataError> {
    let mut width: Option<usize> = None;
    let mut bits = Vec::new();
    let mut labels = Vec::new();
    let mut max_label = 0u8;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(DataError::BadRawLine {
                line,
                reason: "expected `width,label,bits`".into(),
            });
        }
        let w: usize = fields[0].parse().map_err(|_| DataError::BadRawLine {
            line,
            reason: format!("bad width `{}`", fields[0]),
        })?;
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(DataError::BadRawLine {
                    line,
                    reason: format!("width {w} differs from first width {prev}"),
                })
            }
            Some(_) => {}
        }
        let label: u8 = fields[1].parse().map_err(|_| DataError::BadRawLine {
            line,
            reason: format!("bad label `{}`", fields[1]),
        })?;
        if fields[2].len() != w || !fields[2].chars().all(|c| c == '0' || c == '1') {
            return Err(DataError::BadRawLine {
                line,
                reason: format!("bits must be {w} characters of 0/1"),
            });
        }
        bits.extend(fields[2].chars().map(|c| (c == '1') as u8));
        labels.push(label);
        max_label = max_label.max(label);
    }
    let width = width.ok_or(DataError::Empty)?;
    Dataset::new(width, max_label as usize + 1, split, bits, labels)
}

pub fn load_raw(path: &Path, split: Split) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_raw(&text, split)
}

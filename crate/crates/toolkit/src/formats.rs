//! IDX (MNIST-style) and CIFAR-10 binary dataset files.
//!
//! Both readers scale pixel bytes by 1/255 and keep file order. Every format
//! error names the file and the byte offset where parsing stopped.

use std::fs;
use std::path::Path;

use duck_core::data::Dataset;
use duck_core::Tensor;

/// Magic number of an IDX image file (unsigned bytes, three dimensions).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic number of an IDX label file (unsigned bytes, one dimension).
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
/// Pixel bytes of one CIFAR image (3 × 32 × 32).
pub const CIFAR_PIXELS: usize = 3072;
/// One label byte plus the pixels.
pub const CIFAR_RECORD: usize = CIFAR_PIXELS + 1;
pub const CIFAR_CLASSES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {message} (byte offset {offset})")]
    Malformed {
        path: String,
        offset: usize,
        message: String,
    },
    #[error("{path}: header declares zero items")]
    Empty { path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] duck_core::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn malformed(path: &Path, offset: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        path: path.display().to_string(),
        offset,
        message: message.into(),
    }
}

/// Big-endian u32 at `offset`.
fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| malformed(path, bytes.len(), "truncated header"))
}

/// Parsed IDX image file: `count` images of `rows × cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(malformed(path, 0, format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    if count == 0 {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    let expected = count * rows * cols;
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(malformed(
            path,
            16 + body.len().min(expected),
            format!("expected {expected} pixel bytes, found {}", body.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(malformed(path, 0, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    if count == 0 {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    let body = &bytes[8..];
    if body.len() != count {
        return Err(malformed(
            path,
            8 + body.len().min(count),
            format!("expected {count} labels, found {}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

fn scaled(pixels: &[u8]) -> Vec<f64> {
    pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
}

/// Loads an IDX image/label file pair. The class count is one more than the
/// largest label (at least 2).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = parse_idx_images(&read(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read(labels_path)?, labels_path)?;
    if labels.len() != images.count {
        return Err(malformed(
            labels_path,
            4,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let dim = images.rows * images.cols;
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    let features = Tensor::new(vec![images.count, dim], scaled(&images.pixels))?;
    Ok(Dataset::new(features, labels, classes, images_path.display().to_string())?)
}

/// Writes an IDX pair; `pixels` holds `labels.len()` images of `rows × cols`.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    if pixels.len() != labels.len() * rows * cols {
        return Err(malformed(images_path, 16, "pixel count does not match the label count"));
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, labels.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    write(images_path, &img)?;
    write(labels_path, &lab)
}

/// Splits one CIFAR binary file into (label, pixels) records.
pub fn parse_cifar<'a>(bytes: &'a [u8], path: &Path) -> Result<Vec<(u8, &'a [u8])>> {
    if bytes.is_empty() {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(malformed(
            path,
            whole,
            format!("length {} is not a multiple of {CIFAR_RECORD}", bytes.len()),
        ));
    }
    bytes
        .chunks(CIFAR_RECORD)
        .enumerate()
        .map(|(i, rec)| {
            if usize::from(rec[0]) >= CIFAR_CLASSES {
                Err(malformed(path, i * CIFAR_RECORD, format!("label {} outside [0, 10)", rec[0])))
            } else {
                Ok((rec[0], &rec[1..]))
            }
        })
        .collect()
}

/// Concatenates CIFAR-10 binary batch files in the order given.
pub fn load_cifar_binary<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(FormatError::Empty {
            path: "<no CIFAR files>".into(),
        });
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for p in paths {
        let bytes = read(p.as_ref())?;
        for (label, pixels) in parse_cifar(&bytes, p.as_ref())? {
            labels.push(usize::from(label));
            data.extend(pixels.iter().map(|&v| f64::from(v) / 255.0));
        }
    }
    let features = Tensor::new(vec![labels.len(), CIFAR_PIXELS], data)?;
    let name = paths[0].as_ref().display().to_string();
    Ok(Dataset::new(features, labels, CIFAR_CLASSES, name)?)
}

/// Writes `(label, pixels)` records, each `pixels` of [`CIFAR_PIXELS`] bytes.
pub fn write_cifar_binary(path: &Path, records: &[(u8, Vec<u8>)]) -> Result<()> {
    let mut out = Vec::with_capacity(records.len() * CIFAR_RECORD);
    for (i, (label, pixels)) in records.iter().enumerate() {
        if pixels.len() != CIFAR_PIXELS {
            return Err(malformed(path, i * CIFAR_RECORD, "record is not 3072 pixel bytes"));
        }
        out.push(*label);
        out.extend_from_slice(pixels);
    }
    write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_header_errors_carry_offsets() {
        let p = Path::new("x.idx");
        let err = parse_idx_images(&[0, 0, 8, 1, 0, 0, 0, 1], p).unwrap_err();
        assert!(err.to_string().contains("bad image magic") && err.to_string().contains("offset 0"));
        let err = parse_idx_images(&[0, 0, 8, 3, 0, 0], p).unwrap_err();
        assert!(err.to_string().contains("truncated header"));
        let mut hdr = Vec::new();
        for v in [IDX_IMAGES_MAGIC, 2, 2, 2] {
            hdr.extend_from_slice(&v.to_be_bytes());
        }
        hdr.extend_from_slice(&[1, 2, 3]);
        let err = parse_idx_images(&hdr, p).unwrap_err();
        assert!(err.to_string().contains("offset 19"), "{err}");
    }

    #[test]
    fn zero_items_is_empty() {
        let mut hdr = Vec::new();
        for v in [IDX_IMAGES_MAGIC, 0, 28, 28] {
            hdr.extend_from_slice(&v.to_be_bytes());
        }
        assert!(matches!(parse_idx_images(&hdr, Path::new("e")), Err(FormatError::Empty { .. })));
    }

    #[test]
    fn cifar_length_checked() {
        let bytes = vec![0u8; CIFAR_RECORD + 5];
        let err = parse_cifar(&bytes, Path::new("c.bin")).unwrap_err();
        assert!(err.to_string().contains("offset 3073"), "{err}");
        let mut bad = vec![0u8; CIFAR_RECORD];
        bad[0] = 10;
        assert!(parse_cifar(&bad, Path::new("c.bin")).is_err());
    }
}

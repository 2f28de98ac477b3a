//! On-disk cache of trained original models.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "DUCKMDL\0"
//! version    u32
//! tensors    u32      number of parameter tensors
//! shapes     per tensor: rank u32, then rank × u64 dimensions
//! values     every tensor's f64 values in order, raw IEEE-754 LE
//! ```
//!
//! Tensors follow `Model::parameters` order (weight, bias per layer, head
//! last). The file name is a SHA-256 digest of the architecture, training
//! settings, seed and training data, so any change to those misses the cache.

use std::fs;
use std::path::{Path, PathBuf};

use duck_core::data::Dataset;
use duck_core::nn::{train, Architecture, Model, TrainConfig};
use duck_core::Tensor;
use sha2::{Digest, Sha256};

pub const MAGIC: [u8; 8] = *b"DUCKMDL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("model file version {found}, expected {VERSION}")]
    Version { found: u32 },
    #[error("model file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("model file has {extra} trailing bytes")]
    Trailing { extra: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] duck_core::Error),
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let params: Vec<&Tensor> = model.parameters().collect();
    let mut out = Vec::with_capacity(16 + model.parameter_count() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&(p.shape().len() as u32).to_le_bytes());
        for &d in p.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for p in &params {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CacheError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(CacheError::Truncated { offset: self.bytes.len() });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model, CacheError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || r.take(MAGIC.len())? != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CacheError::Version { found: version });
    }
    let count = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        shapes.push(shape);
    }
    let mut params = Vec::with_capacity(count);
    for shape in shapes {
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or(CacheError::Truncated { offset: r.pos })?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.push(Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(CacheError::Trailing { extra: bytes.len() - r.pos });
    }
    Ok(Model::from_parameters(params)?)
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), CacheError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
    }
    fs::write(path, encode_model(model)).map_err(|source| io_error(path, source))
}

pub fn load_model(path: &Path) -> Result<Model, CacheError> {
    let bytes = fs::read(path).map_err(|source| io_error(path, source))?;
    decode_model(&bytes)
}

fn io_error(path: &Path, source: std::io::Error) -> CacheError {
    CacheError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Hex SHA-256 over everything that determines a trained original model.
pub fn cache_key(arch: &Architecture, data: &Dataset, config: &TrainConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(VERSION.to_le_bytes());
    for v in [arch.input_dim, arch.embedding_dim, arch.num_classes, arch.hidden.len()] {
        h.update((v as u64).to_le_bytes());
    }
    for &w in &arch.hidden {
        h.update((w as u64).to_le_bytes());
    }
    h.update((config.epochs as u64).to_le_bytes());
    h.update((config.batch_size as u64).to_le_bytes());
    let o = &config.optimizer;
    for v in [o.learning_rate, o.beta1, o.beta2, o.epsilon, o.weight_decay, config.temperature] {
        h.update(v.to_le_bytes());
    }
    h.update(seed.to_le_bytes());
    h.update((data.len() as u64).to_le_bytes());
    h.update((data.dim() as u64).to_le_bytes());
    for v in data.features().data() {
        h.update(v.to_le_bytes());
    }
    for &y in data.labels() {
        h.update((y as u64).to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

/// How [`cache_original_model`] obtained its model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheOutcome {
    /// No cache directory configured.
    Uncached,
    Hit,
    /// No file yet; trained and stored.
    Stored,
    /// A file existed but could not be used; trained and overwritten.
    Replaced(String),
}

/// Trains the original model once per (architecture, data, settings, seed)
/// and stores it under `dir`; later calls load the file.
pub fn cache_original_model(
    dir: Option<&Path>,
    arch: &Architecture,
    data: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Model, CacheOutcome), CacheError> {
    let fresh = || -> Result<Model, CacheError> { Ok(train(Model::init(arch, seed)?, data, config, seed)?) };
    let Some(dir) = dir else {
        return Ok((fresh()?, CacheOutcome::Uncached));
    };
    let path = model_path(dir, arch, data, config, seed);
    let replaced = match load_model(&path) {
        Ok(model) if layout_matches(&model, arch) => {
            log::info!("loaded original model from {}", path.display());
            return Ok((model, CacheOutcome::Hit));
        }
        Ok(_) => Some("layout does not match the architecture".to_string()),
        Err(CacheError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => Some(e.to_string()),
    };
    if let Some(reason) = &replaced {
        log::warn!("ignoring cached model {}: {reason}; retraining", path.display());
    }
    let model = fresh()?;
    save_model(&model, &path)?;
    Ok((model, replaced.map_or(CacheOutcome::Stored, CacheOutcome::Replaced)))
}

fn layout_matches(model: &Model, arch: &Architecture) -> bool {
    let widths: Vec<usize> = model.backbone().iter().map(|l| l.output_dim()).collect();
    let mut expected = arch.hidden.clone();
    expected.push(arch.embedding_dim);
    model.input_dim() == arch.input_dim && model.num_classes() == arch.num_classes && widths == expected
}

pub fn model_path(dir: &Path, arch: &Architecture, data: &Dataset, config: &TrainConfig, seed: u64) -> PathBuf {
    dir.join(format!("{}.duckmodel", &cache_key(arch, data, config, seed)[..32]))
}

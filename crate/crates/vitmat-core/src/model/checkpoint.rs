//! Checkpoint serialization.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"VITC"
//! version u16 (currently 1)
//! config  u32 length + that many bytes of JSON (the ViTConfig)
//! arrays  for each canonical name in lexicographically sorted order:
//!           u16 name length, name bytes,
//!           u8 rank, rank x u32 dims,
//!           product(dims) x f32 payload
//! crc32   u32 IEEE checksum over every payload byte in written order
//! ```
//!
//! Parameters are stored at 32-bit precision; saving a 64-bit parameter set
//! casts each value down, so only 32-bit round trips are bitwise-exact.

use std::fs;
use std::path::Path;

use super::params::expected_shapes;
use super::{ViTConfig, ViTParams};
use crate::error::{CheckpointError, Error, Result};
use crate::tensor::{Scalar, Tensor};

const MAGIC: &[u8; 4] = b"VITC";
const VERSION: u16 = 1;

/// Writes `params` (cast to f32) and `config` to `path`.
pub fn save_checkpoint<T: Scalar>(
    params: &ViTParams<T>,
    config: &ViTConfig,
    path: &Path,
) -> Result<()> {
    params.validate_against(config)?;
    let mut named: Vec<(String, Tensor<f32>)> = params
        .named()
        .into_iter()
        .map(|(name, t)| (name, t.cast::<f32>()))
        .collect();
    named.sort_by(|a, b| a.0.cmp(&b.0));

    let config_json = serde_json::to_vec(config)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);

    let mut crc = crc32fast::Hasher::new();
    for (name, tensor) in &named {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(tensor.ndim() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            let bytes = v.to_le_bytes();
            crc.update(&bytes);
            buf.extend_from_slice(&bytes);
        }
    }
    buf.extend_from_slice(&crc.finalize().to_le_bytes());
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &str) -> std::result::Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                context: context.to_string(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, context: &str) -> std::result::Result<u16, CheckpointError> {
        let b = self.take(2, context)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, context: &str) -> std::result::Result<u32, CheckpointError> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads a checkpoint back. Any defect — bad magic, unknown version,
/// truncation, shape drift, checksum mismatch — yields the corresponding
/// [`CheckpointError`] and no partial parameter set.
pub fn load_checkpoint(path: &Path) -> Result<(ViTParams<f32>, ViTConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };

    if r.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version).into());
    }
    let config_len = r.u32("config length")? as usize;
    let config: ViTConfig = serde_json::from_slice(r.take(config_len, "config block")?)?;
    config
        .validate()
        .map_err(|e| Error::Config(format!("checkpoint config invalid: {e}")))?;

    let mut expected = expected_shapes(&config);
    expected.sort_by(|a, b| a.0.cmp(&b.0));

    let mut crc = crc32fast::Hasher::new();
    let mut arrays: Vec<(String, Tensor<f32>)> = Vec::with_capacity(expected.len());
    for (name, shape) in &expected {
        let name_len = r.u16("array name length")? as usize;
        let found_name = String::from_utf8_lossy(r.take(name_len, "array name")?).into_owned();
        if &found_name != name {
            return Err(CheckpointError::ShapeMismatch {
                name: found_name,
                expected: shape.clone(),
                found: vec![],
            }
            .into());
        }
        let rank = r.take(1, "array rank")?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("array dims")? as usize);
        }
        if &dims != shape {
            return Err(CheckpointError::ShapeMismatch {
                name: found_name,
                expected: shape.clone(),
                found: dims,
            }
            .into());
        }
        let count: usize = dims.iter().product();
        let payload = r.take(count * 4, &format!("payload of {name}"))?;
        crc.update(payload);
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        arrays.push((found_name, Tensor::new(dims, data)?));
    }

    let stored = r.u32("checksum")?;
    let computed = crc.finalize();
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed }.into());
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes.into());
    }

    // arrays arrive sorted; restore declaration order
    let declaration = expected_shapes(&config);
    let mut ordered = Vec::with_capacity(declaration.len());
    for (name, _) in &declaration {
        let idx = arrays
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .expect("name set already verified");
        ordered.push(arrays[idx].1.clone());
    }
    let params = ViTParams::from_arrays(&config, ordered)?;
    Ok((params, config))
}

/// Guards a checkpoint against a run expecting a different class count.
pub fn check_class_count(config: &ViTConfig, expected_classes: usize) -> Result<()> {
    if config.num_classes != expected_classes {
        return Err(CheckpointError::ClassCountMismatch {
            expected: expected_classes,
            found: config.num_classes,
        }
        .into());
    }
    Ok(())
}

//! Versioned weights container: JSON header (names/shapes/metadata) followed
//! by little-endian IEEE-754 32-bit parameter arrays.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchKind, GraspNet, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QFWB";
const FORMAT_VERSION: u32 = 1;

/// Free-form provenance recorded alongside the weights (config hash, seed,
/// dataset id, ...). BTreeMap keeps serialization order stable.
pub type WeightsMeta = BTreeMap<String, String>;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: String,
    input_size: usize,
    width_scale: f64,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: WeightsMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn save_weights(path: &Path, net: &GraspNet, meta: &WeightsMeta) -> Result<()> {
    let tensors = net
        .manifest()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    let header = Header {
        version: FORMAT_VERSION,
        arch: net.config.arch.id().to_string(),
        input_size: net.config.input_size,
        width_scale: net.config.width_scale,
        tensors,
        meta: meta.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut payload = Vec::new();
    payload.extend_from_slice(MAGIC);
    payload.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    payload.extend_from_slice(&header_bytes);
    for v in net.flatten_params() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }

    crate::imgio::write_atomic(path, &payload)
}

pub fn load_weights(path: &Path) -> Result<(GraspNet, WeightsMeta)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput(format!(
            "{} is not a weights file",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)
        .map_err(|e| Error::io(path, e))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported weights version {}",
            header.version
        )));
    }

    let arch = ArchKind::from_id(&header.arch)?;
    let config = match arch {
        ArchKind::RefFcn => {
            let mut c = ModelConfig::ref_fcn(header.input_size)?;
            c.width_scale = header.width_scale;
            c
        }
        ArchKind::Tiny => {
            let mut c = ModelConfig::tiny(header.input_size);
            c.width_scale = header.width_scale;
            c
        }
    };
    let mut net = GraspNet::init(config, 0);

    let manifest = net.manifest();
    if manifest.len() != header.tensors.len() {
        return Err(Error::InvalidInput(format!(
            "tensor count {} does not match architecture ({} expected)",
            header.tensors.len(),
            manifest.len()
        )));
    }
    for ((name, shape), entry) in manifest.iter().zip(&header.tensors) {
        if name != &entry.name || shape != &entry.shape {
            return Err(Error::InvalidInput(format!(
                "tensor {} shape {:?} does not match expected {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
    }

    let count = net.param_count();
    let mut data = vec![0u8; count * 4];
    file.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
    let mut flat = Vec::with_capacity(count);
    for chunk in data.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::NonFinite("weights file".into()));
        }
        flat.push(v as f64);
    }
    net.set_params(&flat);
    Ok((net, header.meta))
}

// Keep the writer trait import used (older rustc warns otherwise).
#[allow(unused)]
fn _assert_write_usable(w: &mut dyn Write) {
    let _ = w;
}

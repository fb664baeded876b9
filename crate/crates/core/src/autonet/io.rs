//! `MICN` model files.
//!
//! Layout (little-endian): magic `MICN`, `u32` version, `u64` seed, `u32`
//! band count then `f64` low/high per band, `u64` grid hash, `u64` config
//! digest, then every layer's weights followed by its bias as `f64`, in layer
//! order (conv1..conv4, dense), each array row-major in the in-memory layout.

use std::path::Path;

use super::model::{CnnModel, ModelMeta};
use crate::binfmt::{limit, BinError, ByteReader, ByteWriter};
use crate::dsp::BandSpec;

pub const MAGIC: &[u8; 4] = b"MICN";
pub const VERSION: u32 = 1;
const MAX_BANDS: usize = 64;

pub fn model_to_bytes(model: &CnnModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.magic(MAGIC).u32(VERSION).u64(model.meta.seed);
    w.u32(model.meta.bands.len() as u32);
    for b in &model.meta.bands {
        w.f64(b.low_hz).f64(b.high_hz);
    }
    w.u64(model.meta.grid_hash).u64(model.meta.config_digest);
    for p in model.params() {
        w.f64s(p);
    }
    w.into_bytes()
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<CnnModel, BinError> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let seed = r.u64()?;
    let n_bands = r.u32()? as usize;
    limit("band count", n_bands, MAX_BANDS)?;
    let mut bands = Vec::with_capacity(n_bands);
    for _ in 0..n_bands {
        bands.push(BandSpec::new(r.f64()?, r.f64()?));
    }
    let grid_hash = r.u64()?;
    let config_digest = r.u64()?;
    let mut model = CnnModel::zeros(ModelMeta {
        seed,
        bands,
        grid_hash,
        config_digest,
    });
    for p in model.params_mut() {
        let vals = r.f64s(p.len())?;
        p.copy_from_slice(&vals);
    }
    r.finish()?;
    Ok(model)
}

pub fn write_model(model: &CnnModel, path: &Path) -> Result<(), BinError> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<CnnModel, BinError> {
    model_from_bytes(&std::fs::read(path)?)
}

use std::io::{Read, Write};

use super::Model;
use crate::error::{Error, Result};
use crate::nn::Float;

/// Leading bytes of every model file.
pub const MODEL_MAGIC: [u8; 8] = *b"CHARDEP\0";
/// Format version; files of any other version are rejected.
pub const MODEL_VERSION: u32 = 1;

/// Writes magic, version (little endian) and the bincode-encoded model:
/// vocabulary, configuration and every tensor with its momentum and average.
pub fn save_model<F: Float, W: Write>(model: &Model<F>, mut writer: W) -> Result<()> {
    writer.write_all(&MODEL_MAGIC)?;
    writer.write_all(&MODEL_VERSION.to_le_bytes())?;
    bincode::serialize_into(&mut writer, model).map_err(|e| Error::ModelFormat(e.to_string()))?;
    writer.flush()?;
    Ok(())
}

pub fn load_model<F: Float, R: Read>(mut reader: R) -> Result<Model<F>> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::ModelFormat("file too short".into()))?;
    if magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("not a model file".into()));
    }
    let mut version = [0u8; 4];
    reader
        .read_exact(&mut version)
        .map_err(|_| Error::ModelFormat("file too short".into()))?;
    let version = u32::from_le_bytes(version);
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "version {} is not supported (expected {})",
            version, MODEL_VERSION
        )));
    }
    let model: Model<F> = bincode::deserialize_from(&mut reader).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after model".into()));
    }
    model.config.validate()?;
    Ok(model)
}

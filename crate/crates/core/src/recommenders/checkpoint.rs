use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FactorModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "poifair.factor-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

/// Writes a JSON checkpoint. Floats use shortest round-trip formatting, so reloads are exact.
pub fn save_checkpoint(model: &FactorModel, path: &Path) -> Result<()> {
    let env = Envelope {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        model,
    };
    let json = serde_json::to_vec(&env)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<FactorModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<FactorModel> = serde_json::from_slice(&bytes)?;
    if env.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unexpected format {:?}", env.format)));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} not supported (expected {CHECKPOINT_VERSION})",
            env.version
        )));
    }
    Ok(env.model)
}

//! JSON checkpoints for [`MlpParams`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, MlpParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "sagin-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Architecture {
    input_dim: usize,
    side_dim: usize,
    output_dim: usize,
    layer_kinds: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    architecture: Architecture,
    layers: Vec<Layer>,
}

impl MlpParams {
    fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim,
            side_dim: self.side_dim,
            output_dim: self.output_dim,
            layer_kinds: self.layers.iter().map(|l| l.kind().to_string()).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: self.architecture(),
            layers: self.layers.clone(),
        };
        Ok(serde_json::to_string_pretty(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Network(format!("not a network checkpoint (format {:?})", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Network(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        let params = MlpParams::new(ckpt.layers, ckpt.architecture.input_dim)?;
        let arch = params.architecture();
        if arch.side_dim != ckpt.architecture.side_dim
            || arch.output_dim != ckpt.architecture.output_dim
            || arch.layer_kinds != ckpt.architecture.layer_kinds
        {
            return Err(Error::Network("checkpoint architecture does not match its layers".into()));
        }
        Ok(params)
    }

    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn read_checkpoint(mut r: impl Read) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

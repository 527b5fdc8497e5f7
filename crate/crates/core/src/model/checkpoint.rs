//! Checkpoint file layout:
//!
//! ```text
//! "HOGACKPT" | header length (u64 LE) | JSON header | f64 LE parameter blob
//! ```
//!
//! The header records the format version, model kind with its config, the
//! init seed, and every parameter's name and shape in blob order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GcnConfig, HogaConfig, HopMlpConfig, ParamList};
use crate::numerics::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HOGACKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum ModelKind {
    Hoga(HogaConfig),
    HopMlp(HopMlpConfig),
    Gcn(GcnConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelKind,
    pub seed: u64,
    pub params: ParamList,
    /// Output scale of a graph regressor.
    pub target_scale: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model: ModelKind,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_scale: Option<f64>,
    params: Vec<ParamShape>,
}

#[derive(Serialize, Deserialize)]
struct ParamShape {
    name: String,
    shape: Vec<usize>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            version: VERSION,
            model: self.model.clone(),
            seed: self.seed,
            target_scale: self.target_scale,
            params: self
                .params
                .names()
                .iter()
                .zip(self.params.tensors())
                .map(|(n, t)| ParamShape { name: n.clone(), shape: t.shape().to_vec() })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).unwrap_or_default();
        if hlen > body.len() {
            return Err(Error::Format("checkpoint header truncated".into()));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        if header.version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
        }
        let mut blob = body[hlen..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let expected: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
        if body.len() - hlen != 8 * expected {
            return Err(Error::Format(format!(
                "checkpoint blob has {} bytes, header describes {}",
                body.len() - hlen,
                8 * expected
            )));
        }
        let mut params = ParamList::new();
        for p in header.params {
            let count = p.shape.iter().product();
            let data: Vec<f64> = blob.by_ref().take(count).collect();
            params.push(p.name, Tensor::new(p.shape, data)?);
        }
        Ok(Checkpoint { model: header.model, seed: header.seed, params, target_scale: header.target_scale })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Head, HogaModel};

    #[test]
    fn round_trip_and_truncation() {
        let m = HogaModel::init(HogaConfig::new(7, 8, 3, Head::Classifier { classes: 4 }), 11).unwrap();
        let ck = Checkpoint { model: ModelKind::Hoga(m.config.clone()), seed: 11, params: m.params.clone(), target_scale: None };
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"HOGAHOPT").is_err());
    }
}

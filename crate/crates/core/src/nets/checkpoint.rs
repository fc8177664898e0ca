use serde::{Deserialize, Serialize};

use super::{NetParams, Topology};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON checkpoint of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub topology: Topology,
    pub seed: u64,
    pub step: usize,
    pub params: NetParams<f64>,
    pub ema_params: NetParams<f64>,
}

impl Checkpoint {
    pub fn new(seed: u64, step: usize, params: NetParams<f64>, ema_params: NetParams<f64>) -> Self {
        Self { version: CHECKPOINT_VERSION, topology: params.topology.clone(), seed, step, params, ema_params }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", ck.version)));
        }
        if ck.params.topology != ck.topology || ck.ema_params.topology != ck.topology {
            return Err(Error::Data("checkpoint topology mismatch".into()));
        }
        Ok(ck)
    }
}

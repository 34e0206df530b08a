//! Versioned model snapshot: generative parameters, growth config, and the
//! optional discriminative head, as JSON. f64 values are written with a
//! shortest round-trip representation, so parameter round-trips are
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::GrowthConfig;
use crate::head::HeadParams;
use crate::rbm::RbmParams;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: u32,
    pub model: RbmParams,
    pub growth_config: GrowthConfig,
    pub head: Option<HeadParams>,
}

impl ModelSnapshot {
    pub fn new(model: RbmParams, growth_config: GrowthConfig, head: Option<HeadParams>) -> Self {
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            model,
            growth_config,
            head,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let snap: ModelSnapshot = serde_json::from_str(json)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found: snap.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

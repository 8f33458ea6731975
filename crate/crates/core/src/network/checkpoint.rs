//! JSON checkpoints. Floats are written in shortest round-trip form and
//! parsed with correct rounding, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::dropout::FixedMaskTable;
use crate::error::{Error, Result};

const FORMAT: &str = "pcnet-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub parameters: Parameters,
    /// Present for fixed-DropCircuit runs so a resumed run reuses the masks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_masks: Option<FixedMaskTable>,
}

impl Checkpoint {
    pub fn new(parameters: Parameters, fixed_masks: Option<FixedMaskTable>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            parameters,
            fixed_masks,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.parameters.arrays.is_finite() {
            return Err(Error::Parameter("refusing to checkpoint non-finite parameters".into()));
        }
        serde_json::to_string(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::format("<checkpoint>", e.to_string()))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::format(
                "<checkpoint>",
                format!("unsupported checkpoint {} v{}", ck.format, ck.version),
            ));
        }
        ck.parameters.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path, message),
            other => other,
        })
    }
}

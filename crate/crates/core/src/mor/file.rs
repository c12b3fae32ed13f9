use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FrequencyWindow, MorError, ReducedModel};
use crate::network::NetworkTopology;

/// Serialized reduced model with everything needed to reproduce and check
/// it: the projected families, the window, the greedy parameters, the anchor
/// flows and the topology hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RomFile {
    pub format_version: u32,
    pub model: ReducedModel,
    pub window: FrequencyWindow,
    pub svd_decay: f64,
    #[serde(with = "extended")]
    pub local_bound: f64,
    /// May be infinite (accept the first space).
    #[serde(with = "extended")]
    pub global_bound: f64,
    /// Candidate flows `D` (independent coordinates).
    pub snapshots: Vec<Vec<f64>>,
    /// Indices into `snapshots` of the contributing anchors.
    pub anchors: Vec<usize>,
    /// `Δ^δ` over `snapshots` at construction time.
    #[serde(with = "extended")]
    pub delta: f64,
    #[serde(with = "extended_vec")]
    pub errors: Vec<f64>,
}

/// JSON has no infinities: non-finite values travel as `"inf"`, `"-inf"`
/// and `"nan"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Extended {
    Number(f64),
    Text(String),
}

impl Extended {
    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Extended::Number(v)
        } else if v.is_nan() {
            Extended::Text("nan".into())
        } else if v > 0.0 {
            Extended::Text("inf".into())
        } else {
            Extended::Text("-inf".into())
        }
    }

    fn into_f64<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            Extended::Number(v) => Ok(v),
            Extended::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

mod extended {
    use super::Extended;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Extended::from_f64(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Extended::deserialize(d)?.into_f64()
    }
}

mod extended_vec {
    use super::Extended;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| Extended::from_f64(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Extended>::deserialize(d)?.into_iter().map(Extended::into_f64).collect()
    }
}

impl RomFile {
    pub const VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<(), MorError> {
        let text = serde_json::to_string(self).map_err(|e| MorError::Format(e.to_string()))?;
        fs::write(path, text).map_err(|source| MorError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, MorError> {
        let text =
            fs::read_to_string(path).map_err(|source| MorError::Io { path: path.display().to_string(), source })?;
        let file: RomFile = serde_json::from_str(&text).map_err(|e| MorError::Format(e.to_string()))?;
        if file.format_version != Self::VERSION {
            return Err(MorError::Format(format!("unsupported version {}", file.format_version)));
        }
        Ok(file)
    }

    /// Fails unless the model was built from `topology`.
    pub fn check_network(&self, topology: &NetworkTopology) -> Result<(), MorError> {
        let hash = topology.content_hash();
        if hash != self.model.network_hash {
            return Err(MorError::Provenance(format!(
                "model was built for network {} but got {hash}",
                self.model.network_hash
            )));
        }
        Ok(())
    }
}

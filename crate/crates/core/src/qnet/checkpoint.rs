//! Self-describing JSON checkpoints. Parameter arrays are stored as base64 of
//! little-endian `f64`s so the round trip is bit-exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{NetworkSpec, QNetwork};
use super::observation::ObservationConfig;
use crate::error::CheckpointError;

pub const CHECKPOINT_FORMAT: &str = "uavtrack-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Position of a ChaCha8 generator, enough to resume it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// base64 of the 32-byte seed.
    pub seed: String,
    pub stream: u64,
    /// Decimal string: the word position is 68 bits wide.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: STANDARD.encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, CheckpointError> {
        use rand::SeedableRng;
        let bytes = STANDARD
            .decode(&self.seed)
            .map_err(|e| CheckpointError::Format(format!("rng seed: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CheckpointError::Format("rng seed must be 32 bytes".into()))?;
        let word_pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| CheckpointError::Format(format!("rng word_pos: {e}")))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

/// Everything needed to resume training or run evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub online: QNetwork,
    pub target: QNetwork,
    pub observation: ObservationConfig,
    /// Learning rate in effect when the checkpoint was taken.
    pub lr: f64,
    /// Episodes completed.
    pub episode: u64,
    pub gradient_steps: u64,
    pub rng: Option<RngState>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    network: NetworkSpec,
    observation: ObservationConfig,
    params: String,
    target_params: String,
    lr: f64,
    episode: u64,
    gradient_steps: u64,
    rng: Option<RngState>,
}

pub fn encode_params(params: &[f64]) -> String {
    let bytes: Vec<u8> = params.iter().flat_map(|p| p.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_params(text: &str) -> Result<Vec<f64>, CheckpointError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CheckpointError::Format(format!("parameter block: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(CheckpointError::Format(format!(
            "parameter block of {} bytes is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Checkpoint {
    /// Fresh checkpoint with the target network equal to the online one.
    pub fn new(online: QNetwork, observation: ObservationConfig, lr: f64) -> Self {
        Self {
            target: online.clone(),
            online,
            observation,
            lr,
            episode: 0,
            gradient_steps: 0,
            rng: None,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            network: self.online.spec().clone(),
            observation: self.observation,
            params: encode_params(self.online.params()),
            target_params: encode_params(self.target.params()),
            lr: self.lr,
            episode: self.episode,
            gradient_steps: self.gradient_steps,
            rng: self.rng.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CheckpointError::Format(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(CHECKPOINT_FORMAT) => {}
            other => {
                return Err(CheckpointError::Format(format!(
                    "unrecognised format tag {other:?}"
                )))
            }
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let doc: Document =
            serde_json::from_value(value).map_err(|e| CheckpointError::Format(e.to_string()))?;
        doc.observation
            .validate()
            .map_err(CheckpointError::Format)?;
        let online = QNetwork::from_params(doc.network.clone(), decode_params(&doc.params)?)?;
        let target = QNetwork::from_params(doc.network, decode_params(&doc.target_params)?)?;
        if online.input_dim() != doc.observation.dim() {
            return Err(CheckpointError::Format(format!(
                "network input {} does not match observation size {}",
                online.input_dim(),
                doc.observation.dim()
            )));
        }
        if let Some(rng) = &doc.rng {
            rng.restore()?;
        }
        Ok(Self {
            online,
            target,
            observation: doc.observation,
            lr: doc.lr,
            episode: doc.episode,
            gradient_steps: doc.gradient_steps,
            rng: doc.rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

//! Bit-exact policy persistence.
//!
//! Floats are written with shortest round-trip formatting, so a load
//! reproduces every parameter exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::GaussianPolicy;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mgrl-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Hex SHA-256 of the configuration the policy was trained with.
    pub config_hash: String,
    /// The configuration itself, as JSON.
    pub config: serde_json::Value,
    pub policy: GaussianPolicy,
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

impl Checkpoint {
    pub fn new<T: Serialize>(policy: GaussianPolicy, config: &T) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(&config)?,
            config,
            policy,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format '{}'", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if config_hash(&ck.config)? != ck.config_hash {
            return Err(Error::Checkpoint("configuration hash mismatch".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Errors unless the stored configuration hashes to `expected`.
    pub fn ensure_config(&self, expected: &str) -> Result<()> {
        if self.config_hash == expected {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "checkpoint was trained with configuration {} but {} was requested",
                self.config_hash, expected
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{ActorCritic, RunningNorm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> GaussianPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut norm = RunningNorm::default();
        norm.update(&[[0.1; 10], [0.7; 10], [1.0 / 3.0; 10]]);
        GaussianPolicy {
            net: ActorCritic::new(&[64, 64], -0.5, 0.5, &mut rng),
            normalizer: Some(norm),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = Checkpoint::new(policy(), &serde_json::json!({"lr": 3e-4})).unwrap();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let a = ck.policy.net.to_flat();
        let b = back.policy.net.to_flat();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut ck = Checkpoint::new(policy(), &1).unwrap();
        ck.version = 99;
        assert!(matches!(Checkpoint::from_json(&ck.to_json().unwrap()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn tampered_config_is_detected() {
        let mut ck = Checkpoint::new(policy(), &serde_json::json!({"seed": 1})).unwrap();
        ck.config = serde_json::json!({"seed": 2});
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
        let ck = Checkpoint::new(policy(), &serde_json::json!({"seed": 1})).unwrap();
        assert!(ck.ensure_config(&config_hash(&serde_json::json!({"seed": 2})).unwrap()).is_err());
        assert!(ck.ensure_config(&ck.config_hash.clone()).is_ok());
    }
}

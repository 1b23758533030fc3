//! Artifact containers with provenance manifests.
//!
//! Every file produced by the pipeline embeds a [`RunManifest`] plus its
//! SHA-256, so downstream stages can refuse mismatched inputs. Payloads are
//! JSON; floating-point values round-trip exactly (shortest representation).

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Timestamp override for byte-reproducible outputs: when
/// `MOTIONFORGE_EPOCH` is set (unix seconds), it is used instead of the
/// wall clock.
pub fn timestamp() -> u64 {
    if let Ok(v) = std::env::var("MOTIONFORGE_EPOCH") {
        if let Ok(t) = v.parse::<u64>() {
            return t;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// SHA-256 of the canonical JSON encoding of any serializable value.
pub fn hash_of<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable value"))
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Provenance record of the command that produced an artifact.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, Default)]
pub struct RunManifest {
    pub command: String,
    /// `(label, path, sha256)` triples of every input file.
    pub inputs: Vec<(String, String, String)>,
    /// Hashes of in-memory configs that shaped the run.
    pub config_hashes: Vec<(String, String)>,
    pub seed: u64,
    pub toolkit_version: String,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Self {
            command: command.into(),
            inputs: Vec::new(),
            config_hashes: Vec::new(),
            seed,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            created_unix: timestamp(),
        }
    }

    pub fn with_input(mut self, label: &str, path: &Path) -> std::io::Result<Self> {
        self.inputs.push((
            label.to_string(),
            path.display().to_string(),
            hash_file(path)?,
        ));
        Ok(self)
    }

    pub fn with_config<T: Serialize>(mut self, label: &str, cfg: &T) -> Self {
        self.config_hashes.push((label.to_string(), hash_of(cfg)));
        self
    }
}

/// A payload wrapped with its manifest and the manifest hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub manifest: RunManifest,
    pub manifest_hash: String,
    pub payload: T,
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("manifest hash mismatch in {path}: stored {stored}, computed {computed}")]
    HashMismatch {
        path: String,
        stored: String,
        computed: String,
    },
}

pub fn save_artifact<T: Serialize>(
    path: &Path,
    manifest: RunManifest,
    payload: &T,
) -> Result<(), ArtifactError> {
    let artifact = Artifact {
        manifest_hash: hash_of(&manifest),
        manifest,
        payload,
    };
    let bytes = serde_json::to_vec_pretty(&artifact)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_artifact<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>, ArtifactError> {
    let bytes = std::fs::read(path)?;
    let artifact: Artifact<T> = serde_json::from_slice(&bytes)?;
    let computed = hash_of(&artifact.manifest);
    if computed != artifact.manifest_hash {
        return Err(ArtifactError::HashMismatch {
            path: path.display().to_string(),
            stored: artifact.manifest_hash,
            computed,
        });
    }
    Ok(artifact)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hash_round_trip() {
        std::env::set_var("MOTIONFORGE_EPOCH", "1700000000");
        let dir = std::env::temp_dir().join("mf_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("artifact.json");
        let manifest = RunManifest::new("test", 42).with_config("cfg", &vec![1.0f64, 2.0]);
        save_artifact(&path, manifest.clone(), &vec![0.1f64, 0.2]).unwrap();
        let loaded: Artifact<Vec<f64>> = load_artifact(&path).unwrap();
        assert_eq!(loaded.manifest, manifest);
        assert_eq!(loaded.payload, vec![0.1, 0.2]);

        // Tampering with the manifest is detected.
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"seed\": 42", "\"seed\": 43");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_artifact::<Vec<f64>>(&path),
            Err(ArtifactError::HashMismatch { .. })
        ));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let values = vec![0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -2.5e-17];
        let json = serde_json::to_string(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&json).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

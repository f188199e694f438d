//! Versioned binary checkpoints.
//!
//! Layout: `SMATCKPT`, format version (u32 LE), manifest length (u64 LE), JSON
//! manifest, every network's parameters as f64 LE in manifest order, and a SHA-256
//! digest of all preceding bytes.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CurriculumError, AUGMENT_DIMS};
use crate::dynamics::{human_obs_dim, EXO_OBS_DIM};
use crate::env::critic_obs_dim;
use crate::ppo::{Activation, PolicyNet, Squash};

pub const MAGIC: &[u8; 8] = b"SMATCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Serializable ChaCha8 position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Word position as a decimal string (it is a u128).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, CurriculumError> {
        use rand::SeedableRng;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| CurriculumError::CorruptCheckpoint("bad rng word position".into()))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: u8,
    pub steps: u64,
    pub updates: u64,
    pub seed: u64,
    pub config_hash: String,
    pub rng: RngState,
    pub human: PolicyNet,
    pub exo: PolicyNet,
    pub critic: PolicyNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetManifest {
    name: String,
    dims: Vec<usize>,
    n_log_std: usize,
    activation: Activation,
    squash: Squash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    stage: u8,
    steps: u64,
    updates: u64,
    seed: u64,
    config_hash: String,
    rng: RngState,
    networks: Vec<NetManifest>,
}

const NET_NAMES: [&str; 3] = ["human", "exo", "critic"];

impl Checkpoint {
    fn nets(&self) -> [&PolicyNet; 3] {
        [&self.human, &self.exo, &self.critic]
    }

    /// Serialize to bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>, CurriculumError> {
        let manifest = Manifest {
            stage: self.stage,
            steps: self.steps,
            updates: self.updates,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            rng: self.rng.clone(),
            networks: self
                .nets()
                .iter()
                .zip(NET_NAMES)
                .map(|(n, name)| NetManifest {
                    name: name.into(),
                    dims: n.dims().to_vec(),
                    n_log_std: n.n_log_std(),
                    activation: n.activation(),
                    squash: n.squash(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| CurriculumError::CorruptCheckpoint(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for net in self.nets() {
            for p in net.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CurriculumError> {
        let corrupt = |m: &str| CurriculumError::CorruptCheckpoint(m.into());
        if bytes.len() < MAGIC.len() + 12 + DIGEST_LEN {
            return Err(corrupt("file too short"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(CurriculumError::UnsupportedVersion(version));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("digest mismatch"));
        }
        let mlen = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let rest = &body[20..];
        if mlen > rest.len() {
            return Err(corrupt("manifest length exceeds file"));
        }
        let manifest: Manifest =
            serde_json::from_slice(&rest[..mlen]).map_err(|e| CurriculumError::CorruptCheckpoint(e.to_string()))?;
        if manifest.networks.len() != 3
            || manifest.networks.iter().zip(NET_NAMES).any(|(n, name)| n.name != name)
        {
            return Err(corrupt("expected human, exo and critic networks"));
        }
        let mut data = &rest[mlen..];
        let mut nets = Vec::with_capacity(3);
        for m in &manifest.networks {
            if m.dims.len() < 2 {
                return Err(CurriculumError::DimensionMismatch(format!("{}: bad dims {:?}", m.name, m.dims)));
            }
            let count: usize = m.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() + m.n_log_std;
            if data.len() < count * 8 {
                return Err(CurriculumError::DimensionMismatch(format!(
                    "{}: declared {} parameters but only {} bytes remain",
                    m.name,
                    count,
                    data.len()
                )));
            }
            let params = data[..count * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            data = &data[count * 8..];
            let net = PolicyNet::from_parts(m.dims.clone(), params, m.n_log_std, m.activation, m.squash)
                .map_err(|e| CurriculumError::DimensionMismatch(format!("{}: {e}", m.name)))?;
            nets.push(net);
        }
        if !data.is_empty() {
            return Err(CurriculumError::DimensionMismatch("trailing parameter bytes".into()));
        }
        let critic = nets.pop().unwrap();
        let exo = nets.pop().unwrap();
        let human = nets.pop().unwrap();
        Ok(Self {
            stage: manifest.stage,
            steps: manifest.steps,
            updates: manifest.updates,
            seed: manifest.seed,
            config_hash: manifest.config_hash,
            rng: manifest.rng,
            human,
            exo,
            critic,
        })
    }

    /// Check network interfaces against the walker's muscle count and the stage.
    pub fn validate_dims(&self, n_muscles: usize) -> Result<(), CurriculumError> {
        let base = human_obs_dim(n_muscles, false);
        let want_human = if self.stage >= 4 { base + AUGMENT_DIMS } else { base };
        let checks = [
            ("human input", self.human.n_in(), want_human),
            ("human output", self.human.n_out(), n_muscles),
            ("exo input", self.exo.n_in(), EXO_OBS_DIM),
            ("exo output", self.exo.n_out(), 2),
            ("critic input", self.critic.n_in(), critic_obs_dim(n_muscles)),
            ("critic output", self.critic.n_out(), 1),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(CurriculumError::DimensionMismatch(format!(
                    "{what} is {got}, expected {want} for stage {}",
                    self.stage
                )));
            }
        }
        if !(1..=4).contains(&self.stage) {
            return Err(CurriculumError::CorruptCheckpoint(format!("stage {}", self.stage)));
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CurriculumError> {
    std::fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CurriculumError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

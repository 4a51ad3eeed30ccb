//! Versioned binary policy checkpoints. The format stores the network
//! shapes, all parameters, the observation normalization state and the
//! configuration hash of the run that produced them.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::policy::ActorCritic;

const MAGIC: &[u8; 4] = b"JPCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// In-memory checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Hex hash of the run configuration that trained this policy.
    pub config_hash: String,
    pub hidden: Vec<usize>,
    pub actor: Vec<f32>,
    pub critic: Vec<f32>,
    pub log_std: Vec<f32>,
    /// Per-channel observation offsets and scales applied before inference.
    pub obs_mean: Vec<f32>,
    pub obs_std: Vec<f32>,
}

impl Checkpoint {
    /// Capture the current policy parameters.
    pub fn from_policy(policy: &ActorCritic, hidden: &[usize], config_hash: &str) -> Self {
        let obs_dim = super::obs::OBS_DIM;
        Self {
            config_hash: config_hash.to_string(),
            hidden: hidden.to_vec(),
            actor: policy.actor.flatten(),
            critic: policy.critic.flatten(),
            log_std: policy.log_std.to_vec(),
            obs_mean: vec![0.0; obs_dim],
            obs_std: vec![1.0; obs_dim],
        }
    }

    /// Rebuild a policy from the stored parameters.
    pub fn to_policy(&self) -> Result<ActorCritic, CheckpointError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = ActorCritic::new(&self.hidden, 1.0, &mut rng);
        policy.actor.load_flat(&self.actor).map_err(CheckpointError::ShapeMismatch)?;
        policy.critic.load_flat(&self.critic).map_err(CheckpointError::ShapeMismatch)?;
        if self.log_std.len() != policy.log_std.len() {
            return Err(CheckpointError::ShapeMismatch(format!(
                "log_std length {} != {}",
                self.log_std.len(),
                policy.log_std.len()
            )));
        }
        for (dst, &src) in policy.log_std.iter_mut().zip(&self.log_std) {
            *dst = src;
        }
        Ok(policy)
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f32s(w: &mut impl Write, data: &[f32]) -> std::io::Result<()> {
    write_u32(w, data.len() as u32)?;
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s(r: &mut impl Read) -> Result<Vec<f32>, CheckpointError> {
    let n = read_u32(r)? as usize;
    if n > 64 << 20 {
        return Err(CheckpointError::Corrupt(format!("implausible array length {n}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 4];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f32::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let hash = ck.config_hash.as_bytes();
    write_u32(&mut w, hash.len() as u32)?;
    w.write_all(hash)?;
    write_u32(&mut w, ck.hidden.len() as u32)?;
    for &h in &ck.hidden {
        write_u32(&mut w, h as u32)?;
    }
    write_f32s(&mut w, &ck.actor)?;
    write_f32s(&mut w, &ck.critic)?;
    write_f32s(&mut w, &ck.log_std)?;
    write_f32s(&mut w, &ck.obs_mean)?;
    write_f32s(&mut w, &ck.obs_std)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let hash_len = read_u32(&mut r)? as usize;
    if hash_len > 1024 {
        return Err(CheckpointError::Corrupt(format!("hash length {hash_len}")));
    }
    let mut hash = vec![0u8; hash_len];
    r.read_exact(&mut hash)?;
    let config_hash = String::from_utf8(hash)
        .map_err(|e| CheckpointError::Corrupt(format!("hash not utf-8: {e}")))?;
    let n_hidden = read_u32(&mut r)? as usize;
    if n_hidden > 64 {
        return Err(CheckpointError::Corrupt(format!("hidden layer count {n_hidden}")));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(read_u32(&mut r)? as usize);
    }
    let actor = read_f32s(&mut r)?;
    let critic = read_f32s(&mut r)?;
    let log_std = read_f32s(&mut r)?;
    let obs_mean = read_f32s(&mut r)?;
    let obs_std = read_f32s(&mut r)?;
    Ok(Checkpoint { config_hash, hidden, actor, critic, log_std, obs_mean, obs_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::obs::OBS_DIM;
    use ndarray::Array2;

    #[test]
    fn round_trip_is_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let policy = ActorCritic::new(&[32, 16], 1.0, &mut rng);
        let ck = Checkpoint::from_policy(&policy, &[32, 16], "deadbeef");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        save_checkpoint(&path, &ck).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(ck, loaded);

        let restored = loaded.to_policy().unwrap();
        let obs = Array2::from_shape_fn((3, OBS_DIM), |(i, j)| ((i * 7 + j) as f32).sin());
        assert_eq!(policy.act_mean(&obs), restored.act_mean(&obs));
        assert_eq!(policy.values(&obs), restored.values(&obs));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncated_file_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = ActorCritic::new(&[8], 1.0, &mut rng);
        let ck = Checkpoint::from_policy(&policy, &[8], "abc");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        save_checkpoint(&path, &ck).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}

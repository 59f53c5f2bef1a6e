//! Binary checkpoints: magic, little-endian `u32` header length, a JSON
//! header, then every parameter as a little-endian `f64`.

use super::network::{tower_shapes, ActorCritic};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

const MAGIC: &[u8; 8] = b"CNAVCKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub horizon: usize,
    pub shared_shapes: Vec<(usize, usize)>,
    pub cost_shapes: Vec<(usize, usize)>,
    pub n_params: usize,
    pub train_seed: u64,
    pub lambda: f64,
    pub config_hash: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub net: ActorCritic,
}

impl Checkpoint {
    pub fn new(net: ActorCritic, config: ExperimentConfig, train_seed: u64, lambda: f64) -> Self {
        let (shared_shapes, cost_shapes) = net.shapes();
        Self {
            header: Header {
                version: FORMAT_VERSION,
                horizon: net.horizon,
                shared_shapes,
                cost_shapes,
                n_params: net.n_params(),
                train_seed,
                lambda,
                config_hash: config.hash(),
                config,
            },
            net,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.header.n_params);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.net.flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Load(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(12..12 + len)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| Error::Load(format!("header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Load(format!(
                "unsupported checkpoint version {}",
                header.version
            )));
        }
        if header.config.hash() != header.config_hash {
            return Err(bad("config hash does not match the embedded config"));
        }
        let net_cfg = header.config.network;
        if header.shared_shapes != tower_shapes(&net_cfg, header.horizon, true)
            || header.cost_shapes != tower_shapes(&net_cfg, header.horizon, false)
        {
            return Err(bad("parameter shapes do not match the network config"));
        }
        let params = &bytes[12 + len..];
        if params.len() != 8 * header.n_params {
            return Err(Error::Load(format!(
                "expected {} parameter bytes, found {}",
                8 * header.n_params,
                params.len()
            )));
        }
        let values: Vec<f64> = params
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut net = ActorCritic::zeros(net_cfg, header.horizon);
        net.set_flat(&values)?;
        Ok(Self { header, net })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Rejects an environment whose observations the network cannot read.
    pub fn check_compatible(&self, env: &crate::sim::EnvConfig) -> Result<()> {
        if env.prediction_horizon != self.header.horizon {
            return Err(Error::Load(format!(
                "checkpoint expects prediction horizon {} but the config uses {}",
                self.header.horizon, env.prediction_horizon
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = ExperimentConfig::default();
        let net = ActorCritic::new(config.network, 5, 42);
        Checkpoint::new(net, config, 42, 0.37)
    }

    #[test]
    fn bit_exact_round_trip() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        let a: Vec<u64> = ck.net.flat().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.net.flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let ck = sample();
        ck.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), ck);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&[]).is_err());
    }

    #[test]
    fn horizon_mismatch_is_a_load_error() {
        let ck = sample();
        let mut env = crate::sim::EnvConfig::default();
        assert!(ck.check_compatible(&env).is_ok());
        env.prediction_horizon = 3;
        assert!(matches!(ck.check_compatible(&env), Err(Error::Load(_))));
    }
}

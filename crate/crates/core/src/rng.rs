//! Counter-style derivation of independent random streams.
//!
//! Every random draw in a run comes from a stream keyed by
//! `(master seed, label, agent, round)`. The key is packed directly into a
//! ChaCha seed, so the realization for one agent never depends on how many
//! draws another agent made or on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for. Distinct labels never share a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    Data,
    ChannelBob,
    ChannelEve,
    Injection,
    Gamma,
    Validation,
}

impl StreamLabel {
    fn tag(self) -> u64 {
        match self {
            StreamLabel::Data => 0x6461_7461,
            StreamLabel::ChannelBob => 0x0063_6862_6f62,
            StreamLabel::ChannelEve => 0x0063_6865_7665,
            StreamLabel::Injection => 0x696e_6a65_6374,
            StreamLabel::Gamma => 0x0067_616d_6d61,
            StreamLabel::Validation => 0x0076_616c_6964,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, label: StreamLabel, agent: usize, round: usize) -> NoiseStream {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master.to_le_bytes());
        seed[8..16].copy_from_slice(&label.tag().to_le_bytes());
        seed[16..24].copy_from_slice(&(agent as u64).to_le_bytes());
        seed[24..32].copy_from_slice(&(round as u64).to_le_bytes());
        NoiseStream {
            rng: ChaCha12Rng::from_seed(seed),
        }
    }
}

/// A deterministic source of `f64` samples.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
}

impl NoiseStream {
    /// Stream seeded directly; useful in tests.
    pub fn from_seed(seed: u64) -> Self {
        SeedTree::new(seed).stream(StreamLabel::Validation, 0, 0)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn gaussian(&mut self, std_dev: f64) -> f64 {
        std_dev * self.standard_normal()
    }

    /// Zero-mean Laplace sample with the given scale, by inverting the CDF.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        // u uniform on (-1/2, 1/2); 1 - 2|u| stays in (0, 1]
        let u: f64 = self.rng.random::<f64>() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

//! Noise-injection baselines: each agent adds Gaussian or Laplace noise to
//! its difference and ships the whole noise vector (`d` scalars) to the
//! server over the secret channel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::SecretLedger;
use crate::error::{ModShiftError, Result};
use crate::fedcore::Delta;
use crate::rng::NoiseStream;
use crate::scalar::Scalar;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    Gaussian,
    Laplace,
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjectionKind::Gaussian => "gaussian",
            InjectionKind::Laplace => "laplace",
        })
    }
}

impl FromStr for InjectionKind {
    type Err = ModShiftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(InjectionKind::Gaussian),
            "laplace" => Ok(InjectionKind::Laplace),
            other => Err(ModShiftError::Config(format!("unknown baseline kind '{other}'"))),
        }
    }
}

/// Gaussian noise has covariance `β²I`; Laplace noise has scale `λ`
/// (variance `2λ²`) per entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionConfig {
    kind: InjectionKind,
    beta_sq: f64,
    lambda: f64,
}

impl InjectionConfig {
    pub fn gaussian(beta_sq: f64) -> Result<Self> {
        if !(beta_sq >= 0.0) || !beta_sq.is_finite() {
            return Err(ModShiftError::Config("beta_sq must be >= 0".into()));
        }
        Ok(Self {
            kind: InjectionKind::Gaussian,
            beta_sq,
            lambda: 0.0,
        })
    }

    pub fn laplace(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(ModShiftError::Config("lambda must be >= 0".into()));
        }
        Ok(Self {
            kind: InjectionKind::Laplace,
            beta_sq: 0.0,
            lambda,
        })
    }

    /// Laplace parameterized by `λ²`, the quantity swept in experiments.
    pub fn laplace_from_sq(lambda_sq: f64) -> Result<Self> {
        if !(lambda_sq >= 0.0) {
            return Err(ModShiftError::Config("lambda_sq must be >= 0".into()));
        }
        Self::laplace(lambda_sq.sqrt())
    }

    pub fn kind(&self) -> InjectionKind {
        self.kind
    }

    pub fn beta_sq(&self) -> f64 {
        self.beta_sq
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-entry variance of the injected noise.
    pub fn variance(&self) -> f64 {
        match self.kind {
            InjectionKind::Gaussian => self.beta_sq,
            InjectionKind::Laplace => 2.0 * self.lambda * self.lambda,
        }
    }

    fn sample(&self, stream: &mut NoiseStream) -> f64 {
        match self.kind {
            InjectionKind::Gaussian => stream.gaussian(self.beta_sq.sqrt()),
            InjectionKind::Laplace => stream.laplace(self.lambda),
        }
    }
}

/// A perturbed difference and the noise that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Injected<T> {
    pub perturbed: Signal<T>,
    pub noise: Vec<T>,
}

/// `δ + ν` with `ν` drawn from `cfg`; records `d` secret scalars.
pub fn inject<T: Scalar>(
    delta: &Delta<T>,
    cfg: &InjectionConfig,
    stream: &mut NoiseStream,
    ledger: &mut SecretLedger,
) -> Injected<T> {
    let noise: Vec<T> = (0..delta.dim()).map(|_| T::of(cfg.sample(stream))).collect();
    ledger.record(delta.agent_id, delta.round, delta.dim() as u64);
    let perturbed = Signal::from_vector(delta.values.clone())
        .add_vector(noise.clone())
        .expect("noise matches delta dimension");
    Injected { perturbed, noise }
}

/// Removes the shared noise vector from what Bob received.
pub fn bob_denoise<T: Scalar>(received: Signal<T>, noise: &[T]) -> Result<Vec<T>> {
    let negated = noise.iter().map(|&x| -x).collect();
    Ok(received.add_vector(negated)?.readout())
}

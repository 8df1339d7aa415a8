//! Per-link observations for Bob and Eve, Bob's shift compensation, and the
//! metered secret side channel.
//!
//! Each link is flat fading with known gain `h` and real additive Gaussian
//! noise of per-entry variance `σ²/h²`.

use std::collections::BTreeMap;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{ModShiftError, Result};
use crate::rng::NoiseStream;
use crate::scalar::{all_finite, Scalar};
use crate::shift::ShiftedDelta;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    Bob,
    Eve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    h: T,
    sigma: T,
    receiver: Receiver,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn new(h: T, sigma: T, receiver: Receiver) -> Result<Self> {
        if !(h > T::zero()) || !Float::is_finite(h) {
            return Err(ModShiftError::Config("channel gain must be positive".into()));
        }
        if !(sigma >= T::zero()) || !Float::is_finite(sigma) {
            return Err(ModShiftError::Config("channel noise level must be >= 0".into()));
        }
        Ok(Self { h, sigma, receiver })
    }

    /// Unit gain with the given effective per-entry noise variance `σ²/h²`.
    pub fn from_noise_var(var: T, receiver: Receiver) -> Result<Self> {
        if !(var >= T::zero()) {
            return Err(ModShiftError::Config("channel noise variance must be >= 0".into()));
        }
        Self::new(T::one(), Float::sqrt(var), receiver)
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn receiver(&self) -> Receiver {
        self.receiver
    }

    pub fn noise_var(&self) -> T {
        let s = self.sigma / self.h;
        s * s
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma == T::zero()
    }
}

/// Superimposes the link's noise on `signal`. A noiseless link returns the
/// signal untouched and consumes nothing from the stream.
pub fn transmit<T: Scalar>(
    signal: Signal<T>,
    params: &ChannelParams<T>,
    stream: &mut NoiseStream,
) -> Signal<T> {
    if params.is_noiseless() {
        return signal;
    }
    let std_dev = (params.sigma / params.h).to_f64_lossy();
    let noise: Vec<T> = (0..signal.dim()).map(|_| T::of(stream.gaussian(std_dev))).collect();
    signal
        .add_vector(noise)
        .expect("noise vector matches signal dimension")
}

/// `payload + z` for a plain vector payload.
pub fn transmit_vector<T: Scalar>(
    payload: &[T],
    params: &ChannelParams<T>,
    stream: &mut NoiseStream,
) -> Result<Vec<T>> {
    if !all_finite(payload) {
        return Err(ModShiftError::Config("payload has non-finite entries".into()));
    }
    Ok(transmit(Signal::from_vector(payload.to_vec()), params, stream).readout())
}

/// What Eve reads: `δ + f(δ)·𝟙 + z_E`.
pub fn eve_observe<T: Scalar>(
    shifted: &ShiftedDelta<T>,
    params: &ChannelParams<T>,
    stream: &mut NoiseStream,
) -> Result<Vec<T>> {
    expect_receiver(params, Receiver::Eve)?;
    Ok(transmit(shifted.signal(), params, stream).readout())
}

/// Bob's received signal with the secret scalar removed:
/// `δ + f(δ)·𝟙 + z_B − scalar·𝟙`. Records one secret scalar in `ledger`.
pub fn bob_receive_and_compensate<T: Scalar>(
    shifted: &ShiftedDelta<T>,
    secret_scalar: T,
    params: &ChannelParams<T>,
    stream: &mut NoiseStream,
    ledger: &mut SecretLedger,
) -> Result<Vec<T>> {
    expect_receiver(params, Receiver::Bob)?;
    let received = transmit(shifted.signal(), params, stream);
    ledger.record(shifted.agent_id, shifted.round, 1);
    Ok(received.add_uniform(-secret_scalar).readout())
}

fn expect_receiver<T: Scalar>(params: &ChannelParams<T>, want: Receiver) -> Result<()> {
    if params.receiver != want {
        return Err(ModShiftError::Usage(format!(
            "channel parameters belong to {:?}, expected {want:?}",
            params.receiver
        )));
    }
    Ok(())
}

/// Counts the scalars each agent sends over the secret channel per round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SecretLedger {
    #[serde(skip)]
    entries: BTreeMap<(usize, usize), u64>,
    total: u64,
}

impl SecretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, agent: usize, round: usize, scalars: u64) {
        *self.entries.entry((round, agent)).or_insert(0) += scalars;
        self.total += scalars;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn for_agent_round(&self, agent: usize, round: usize) -> u64 {
        self.entries.get(&(round, agent)).copied().unwrap_or(0)
    }

    pub fn for_round(&self, round: usize) -> u64 {
        self.entries
            .range((round, 0)..(round + 1, 0))
            .map(|(_, &v)| v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedcore::Delta;
    use crate::shift::apply_shift;

    fn shifted(v: &[f64], gamma: &[f64]) -> ShiftedDelta<f64> {
        apply_shift(&Delta::new(v.to_vec(), 2, 5).unwrap(), gamma).unwrap()
    }

    #[test]
    fn noiseless_transmit_is_identity() {
        let p = ChannelParams::new(1.0, 0.0, Receiver::Bob).unwrap();
        let mut s = NoiseStream::from_seed(1);
        assert_eq!(transmit_vector(&[1.5, -2.0], &p, &mut s).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn transmit_is_seed_deterministic() {
        let p = ChannelParams::from_noise_var(0.1, Receiver::Eve).unwrap();
        let a = transmit_vector(&[0.0; 8], &p, &mut NoiseStream::from_seed(4)).unwrap();
        let b = transmit_vector(&[0.0; 8], &p, &mut NoiseStream::from_seed(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, vec![0.0; 8]);
    }

    #[test]
    fn eve_examples() {
        let p = ChannelParams::new(1.0, 0.0, Receiver::Eve).unwrap();
        let mut s = NoiseStream::from_seed(1);
        let obs = eve_observe(&shifted(&[3.0, 1.0, 2.0], &[-1.0, 0.0, 0.0]), &p, &mut s).unwrap();
        assert_eq!(obs, vec![0.0, -2.0, -1.0]);
        let bob = ChannelParams::new(1.0, 0.0, Receiver::Bob).unwrap();
        assert!(eve_observe(&shifted(&[3.0, 1.0, 2.0], &[-1.0, 0.0, 0.0]), &bob, &mut s).is_err());
    }

    #[test]
    fn bob_noiseless_compensation_is_exact() {
        let p = ChannelParams::new(1.0, 0.0, Receiver::Bob).unwrap();
        let mut ledger = SecretLedger::new();
        for gamma in [[-1.0, 0.0, 0.0], [-1.0 / 3.0; 3], [0.0, -1.0, 0.0]] {
            let sd = shifted(&[3.0, 1.0, 2.0], &gamma);
            let got = bob_receive_and_compensate(&sd, sd.shift_scalar(), &p, &mut NoiseStream::from_seed(0), &mut ledger)
                .unwrap();
            assert_eq!(got, vec![3.0, 1.0, 2.0]);
        }
        assert_eq!(ledger.total(), 3);
        assert_eq!(ledger.for_agent_round(2, 5), 3);
        assert_eq!(ledger.for_round(5), 3);
        assert_eq!(ledger.for_round(4), 0);
    }

    #[test]
    fn bob_noisy_matches_unshifted_transmission() {
        let p = ChannelParams::from_noise_var(0.1, Receiver::Bob).unwrap();
        let delta = [0.31, -1.7, 2.25, 1e-3];
        let sd = shifted(&delta, &[-0.25; 4]);
        let mut ledger = SecretLedger::new();
        let got = bob_receive_and_compensate(&sd, sd.shift_scalar(), &p, &mut NoiseStream::from_seed(9), &mut ledger)
            .unwrap();
        let plain = transmit_vector(&delta, &p, &mut NoiseStream::from_seed(9)).unwrap();
        assert_eq!(got, plain);
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(0.0, 1.0, Receiver::Bob).is_err());
        assert!(ChannelParams::new(1.0, -1.0, Receiver::Bob).is_err());
        let p = ChannelParams::new(2.0, 1.0, Receiver::Bob).unwrap();
        assert_eq!(p.noise_var(), 0.25);
    }
}

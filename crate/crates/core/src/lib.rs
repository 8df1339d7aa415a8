//! Model privacy for federated learning through designed shifts.
//!
//! Agents running FedAvg add `f(δ)·𝟙 = (γᵀδ)·𝟙` to each round difference
//! before transmission. Any `γ` with `γᵀ𝟙 = −1` makes an eavesdropper's
//! Fisher information singular, while the server, which receives the single
//! scalar `γᵀδ` over a secret channel, removes the shift exactly.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases below
//! fix the common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod fedcore;
pub mod fim;
pub mod rng;
pub mod scalar;
pub mod shift;
pub mod signal;

pub use error::{ModShiftError, Result};
pub use scalar::Scalar;

pub type ModelVectorF64 = fedcore::ModelVector<f64>;
pub type ModelVectorF32 = fedcore::ModelVector<f32>;
pub type LocalDatasetF64 = fedcore::LocalDataset<f64>;
pub type LocalDatasetF32 = fedcore::LocalDataset<f32>;
pub type DeltaF64 = fedcore::Delta<f64>;
pub type TrainConfigF64 = fedcore::TrainConfig<f64>;
pub type ShiftSchemeF64 = shift::ShiftScheme<f64>;
pub type ShiftedDeltaF64 = shift::ShiftedDelta<f64>;
pub type FimContextF64 = fim::FimContext<f64>;
pub type ChannelParamsF64 = channel::ChannelParams<f64>;
pub type EveStateF64 = adversary::EveState<f64>;
pub type RunOutputF64 = experiment::RunOutput<f64>;

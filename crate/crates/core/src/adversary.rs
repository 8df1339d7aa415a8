//! Eve: model reconstruction from raw observations and the convergence
//! (tamper) test.
//!
//! Eve adds the weighted sum of what she overhears to her running model. If
//! the server converges she expects her own updates to shrink. With a
//! shared `γ` her update norm stays below `ε(1 + √d‖γ‖)`, where `ε` is the
//! server's update norm; with per-agent `γ_k` the bound picks up the
//! alignment ratio `α(n)`.

use num_traits::Float;

use crate::error::{ModShiftError, Result};
use crate::fedcore::{weighted_sum, Delta, ModelVector};
use crate::scalar::{norm, Scalar};

/// Slack added to the bound by [`tamper_test`].
pub const TAMPER_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EveState<T> {
    pub w_eve: ModelVector<T>,
    /// `‖w(n+1)^E − w(n)^E‖` for each completed round.
    pub history: Vec<T>,
    pub tamper_flags: Vec<bool>,
}

impl<T: Scalar> EveState<T> {
    pub fn new(w0: ModelVector<T>) -> Self {
        Self {
            w_eve: w0,
            history: Vec::new(),
            tamper_flags: Vec::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn last_update_norm(&self) -> Option<T> {
        self.history.last().copied()
    }

    pub fn record_tamper(&mut self, passed: bool) {
        self.tamper_flags.push(passed);
    }
}

/// `w^E ← w^E + Σ_k (m_k/m) y_k^E`; observations are ordered by agent.
pub fn eve_update<T: Scalar>(
    mut state: EveState<T>,
    observations: &[Vec<T>],
    weights: &[T],
) -> Result<EveState<T>> {
    let d = state.w_eve.dim();
    let views: Vec<&[T]> = observations.iter().map(Vec::as_slice).collect();
    let step = weighted_sum(&views, weights, d)?;
    let values: Vec<T> = state
        .w_eve
        .as_slice()
        .iter()
        .zip(&step)
        .map(|(&w, &s)| w + s)
        .collect();
    state.history.push(norm(&step));
    state.w_eve = ModelVector::new(values)?;
    Ok(state)
}

/// `α(n)`; `degenerate` marks a zero weighted sum, where the value is `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment<T> {
    pub value: T,
    pub degenerate: bool,
}

/// `Σ_k w_k‖δ_k‖ / ‖Σ_k w_k δ_k‖`.
pub fn alpha<T: Scalar>(deltas: &[Delta<T>], weights: &[T]) -> Result<Alignment<T>> {
    let d = deltas
        .first()
        .map(Delta::dim)
        .ok_or_else(|| ModShiftError::Protocol("alpha needs at least one delta".into()))?;
    let views: Vec<&[T]> = deltas.iter().map(|x| x.values.as_slice()).collect();
    let combined = norm(&weighted_sum(&views, weights, d)?);
    let spread = deltas
        .iter()
        .zip(weights)
        .fold(T::zero(), |acc, (x, &w)| acc + w * norm(&x.values));
    if combined == T::zero() {
        return Ok(Alignment {
            value: T::infinity(),
            degenerate: true,
        });
    }
    Ok(Alignment {
        value: spread / combined,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TamperBoundInputs<T> {
    /// Bob's update norm `‖w(n+1) − w(n)‖`.
    pub epsilon: T,
    /// `‖γ_k(n)‖` per agent; zeros when nothing is shifted.
    pub gamma_norms: Vec<T>,
    pub alpha: T,
    /// All agents used the same `γ(n)`.
    pub homogeneous: bool,
}

impl<T: Scalar> TamperBoundInputs<T> {
    pub fn new(epsilon: T, gamma_norms: Vec<T>, alpha: T, homogeneous: bool) -> Result<Self> {
        if !(epsilon >= T::zero()) {
            return Err(ModShiftError::Config("epsilon must be >= 0".into()));
        }
        if gamma_norms.iter().any(|&g| !(g >= T::zero())) {
            return Err(ModShiftError::Config("gamma norms must be >= 0".into()));
        }
        // α ≥ 1 by the triangle inequality, up to rounding.
        if !(alpha >= T::one() - Float::max(T::of(1e-12), T::epsilon() * T::of(16.0))) {
            return Err(ModShiftError::Config(format!("alpha must be >= 1, got {alpha}")));
        }
        Ok(Self {
            epsilon,
            gamma_norms,
            alpha,
            homogeneous,
        })
    }
}

/// Upper bound on Eve's update norm given the server's.
///
/// Homogeneous: `ε(1 + √d‖γ‖)`; otherwise `ε(1 + √d · max_k‖γ_k‖ · α)`.
pub fn tamper_bound<T: Scalar>(inputs: &TamperBoundInputs<T>, d: usize) -> T {
    let root_d = Float::sqrt(T::of(d as f64));
    let gmax = inputs
        .gamma_norms
        .iter()
        .fold(T::zero(), |a, &b| Float::max(a, b));
    let eps = inputs.epsilon;
    if inputs.homogeneous || gmax == T::zero() {
        return eps * (T::one() + root_d * gmax);
    }
    if Float::is_infinite(inputs.alpha) {
        // ε·α is the weighted norm sum, unbounded when the updates cancel.
        return T::infinity();
    }
    eps * (T::one() + root_d * gmax * inputs.alpha)
}

/// Passes iff Eve's update norm is within the bound (plus [`TAMPER_ABS_TOL`]).
pub fn tamper_test<T: Scalar>(eve_update_norm: T, bound: T) -> bool {
    eve_update_norm <= bound + T::of(TAMPER_ABS_TOL)
}

/// Whether every agent used exactly the same `γ`.
pub fn gammas_homogeneous<T: Scalar>(gammas: &[Vec<T>]) -> bool {
    gammas.windows(2).all(|w| w[0] == w[1])
}

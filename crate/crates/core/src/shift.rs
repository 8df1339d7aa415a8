//! Shift design: coefficient vectors `γ` with `γᵀ𝟙 = −1` and the linear
//! shift `f(δ) = γᵀδ` added to every coordinate of an outgoing difference.
//!
//! The transmitted vector is `(I + 𝟙γᵀ)δ`, a rank `d − 1` map. Only the
//! scalar `γᵀδ` has to reach the server over the secret channel.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{ModShiftError, Result};
use crate::fedcore::Delta;
use crate::scalar::{all_finite, dot, Scalar};
use crate::signal::{exact_sum, Signal};

/// Tolerance on `γᵀ𝟙 = −1`.
pub const GAMMA_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Max,
    Mean,
    Comp,
    Custom,
    None,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Max => "max",
            SchemeKind::Mean => "mean",
            SchemeKind::Comp => "comp",
            SchemeKind::Custom => "custom",
            SchemeKind::None => "none",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = ModShiftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(SchemeKind::Max),
            "mean" => Ok(SchemeKind::Mean),
            "comp" => Ok(SchemeKind::Comp),
            "custom" => Ok(SchemeKind::Custom),
            "none" => Ok(SchemeKind::None),
            other => Err(ModShiftError::Config(format!("unknown shift scheme '{other}'"))),
        }
    }
}

/// A rule producing `γ_k(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScheme<T> {
    kind: SchemeKind,
    custom_gamma: Option<Vec<T>>,
}

impl<T: Scalar> ShiftScheme<T> {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            custom_gamma: None,
        }
    }

    pub fn max() -> Self {
        Self::new(SchemeKind::Max)
    }

    pub fn mean() -> Self {
        Self::new(SchemeKind::Mean)
    }

    pub fn comp() -> Self {
        Self::new(SchemeKind::Comp)
    }

    pub fn none() -> Self {
        Self::new(SchemeKind::None)
    }

    pub fn custom(gamma: Vec<T>) -> Result<Self> {
        if !validate_gamma(&gamma) {
            return Err(ModShiftError::ConstraintViolation {
                sum: exact_sum(&gamma).to_f64_lossy(),
            });
        }
        Ok(Self {
            kind: SchemeKind::Custom,
            custom_gamma: Some(gamma),
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn custom_gamma(&self) -> Option<&[T]> {
        self.custom_gamma.as_deref()
    }
}

/// `γ_k(n)` for `scheme`, given the agent's difference.
///
/// Max puts `−1` at the first index of largest `|δ_i|`; Mean is `−1/d`
/// everywhere; Comp is `−e_0`.
pub fn make_gamma<T: Scalar>(scheme: &ShiftScheme<T>, delta: &Delta<T>) -> Result<Vec<T>> {
    let d = delta.dim();
    if d < 2 {
        return Err(ModShiftError::Config(format!("shift design needs d >= 2, got {d}")));
    }
    let gamma = match scheme.kind {
        SchemeKind::Max => {
            let mut best = 0;
            for (i, &v) in delta.values.iter().enumerate() {
                if Float::abs(v) > Float::abs(delta.values[best]) {
                    best = i;
                }
            }
            unit(d, best)
        }
        SchemeKind::Mean => vec![-(T::one() / T::of(d as f64)); d],
        SchemeKind::Comp => unit(d, 0),
        SchemeKind::Custom => {
            let g = scheme
                .custom_gamma
                .as_ref()
                .ok_or_else(|| ModShiftError::Config("custom scheme without gamma vector".into()))?;
            if g.len() != d {
                return Err(ModShiftError::DimensionMismatch {
                    expected: d,
                    found: g.len(),
                });
            }
            g.clone()
        }
        SchemeKind::None => {
            return Err(ModShiftError::Usage("scheme 'none' has no gamma".into()));
        }
    };
    Ok(gamma)
}

fn unit<T: Scalar>(d: usize, index: usize) -> Vec<T> {
    let mut g = vec![T::zero(); d];
    g[index] = -T::one();
    g
}

/// True iff `Σ γ_i = −1` within [`GAMMA_SUM_TOL`] and every entry is finite.
pub fn validate_gamma<T: Scalar>(gamma: &[T]) -> bool {
    if gamma.is_empty() || !all_finite(gamma) {
        return false;
    }
    // f32 cannot resolve 1e-10; widen to a few ulps per term there.
    let tol = GAMMA_SUM_TOL.max(4.0 * gamma.len() as f64 * T::epsilon().to_f64_lossy());
    (exact_sum(gamma).to_f64_lossy() + 1.0).abs() <= tol
}

/// An outgoing difference with its shift `f(δ)·𝟙` superimposed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedDelta<T> {
    delta: Vec<T>,
    shift_scalar: T,
    pub agent_id: usize,
    pub round: usize,
}

impl<T: Scalar> ShiftedDelta<T> {
    pub fn shift_scalar(&self) -> T {
        self.shift_scalar
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    /// The on-air waveform `δ + f(δ)·𝟙`.
    pub fn signal(&self) -> Signal<T> {
        Signal::from_vector(self.delta.clone()).add_uniform(self.shift_scalar)
    }

    /// `δ + f(δ)·𝟙`, each entry correctly rounded.
    pub fn values(&self) -> Vec<T> {
        self.signal().readout()
    }

    /// Removes the shift again: `values − f(δ)·𝟙`.
    pub fn compensated(&self) -> Vec<T> {
        self.signal().add_uniform(-self.shift_scalar).readout()
    }
}

/// Applies `f(δ) = γᵀδ`: the result carries `(I + 𝟙γᵀ)δ`.
pub fn apply_shift<T: Scalar>(delta: &Delta<T>, gamma: &[T]) -> Result<ShiftedDelta<T>> {
    if gamma.len() != delta.dim() {
        return Err(ModShiftError::DimensionMismatch {
            expected: delta.dim(),
            found: gamma.len(),
        });
    }
    if !validate_gamma(gamma) {
        return Err(ModShiftError::ConstraintViolation {
            sum: exact_sum(gamma).to_f64_lossy(),
        });
    }
    Ok(ShiftedDelta {
        delta: delta.values.clone(),
        shift_scalar: dot(gamma, &delta.values),
        agent_id: delta.agent_id,
        round: delta.round,
    })
}

/// The dense map `I + 𝟙γᵀ`.
pub fn shift_matrix<T: Scalar>(gamma: &[T]) -> DMatrix<T> {
    let d = gamma.len();
    DMatrix::from_fn(d, d, |i, j| {
        let id = if i == j { T::one() } else { T::zero() };
        id + gamma[j]
    })
}

/// `d − rank(I + 𝟙γᵀ)`, with singular values below `d · ε · σ_max` treated
/// as zero. Equals 1 whenever `γᵀ𝟙 = −1`.
pub fn shift_matrix_rank_deficiency<T: Scalar>(gamma: &[T], d: usize) -> Result<usize> {
    if gamma.len() != d {
        return Err(ModShiftError::DimensionMismatch {
            expected: d,
            found: gamma.len(),
        });
    }
    Ok(d - numerical_rank(&shift_matrix(gamma)))
}

pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    let sv = m.clone().singular_values();
    let largest = sv.iter().fold(T::zero(), |a, &b| Float::max(a, b));
    let cutoff = T::of(m.nrows().max(m.ncols()) as f64) * T::epsilon() * largest;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// `Dδ = [δ_1 − δ_2, …, δ_1 − δ_d]`, the argument of the free term `g`.
pub fn difference_map<T: Scalar>(delta: &[T]) -> Vec<T> {
    delta.iter().skip(1).map(|&x| delta[0] - x).collect()
}

/// Chain rule through [`difference_map`]: the gradient of `g(Dδ)` with
/// respect to `δ` given `∇g` at `Dδ`.
pub fn difference_map_gradient<T: Scalar>(grad_g: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(grad_g.len() + 1);
    out.push(grad_g.iter().fold(T::zero(), |a, &b| a + b));
    out.extend(grad_g.iter().map(|&u| -u));
    out
}

/// Accepts a free-term gradient (taken with respect to `δ`) iff its entries
/// sum to zero within `tol`, which keeps `γᵀ𝟙 = −1` intact for `f = γᵀδ + g`.
/// The shipped schemes use `g ≡ 0`.
pub fn free_term_hook<T: Scalar>(g_grad: &[T], tol: T) -> bool {
    all_finite(g_grad) && Float::abs(exact_sum(g_grad)) <= tol
}

//! Eve's Fisher information for shifted differences.
//!
//! For the observation `y = δ + f(δ)·𝟙 + z` with isotropic Gaussian noise the
//! information matrix is
//!
//! ```text
//! J = c · (I + 𝟙∇fᵀ + ∇f𝟙ᵀ + d·∇f∇fᵀ),   c = 2h²/σ²
//! ```
//!
//! When `∇fᵀ𝟙 = −1` the all-ones direction is in its null space and the
//! spectrum is `{0, c (×(d−2)), c·d·‖∇f‖²}`. The matrix determinant lemma
//! gives `det(J/c − λI)` from a 3×3 determinant, which is how the spectrum is
//! derived and how it is cross-checked here.

use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{ModShiftError, Result};
use crate::scalar::{all_finite, dot, Scalar};
use crate::shift::validate_gamma;

/// Default relative tolerance for calling a spectrum singular.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FimContext<T> {
    grad_f: Vec<T>,
    h: T,
    sigma: T,
}

impl<T: Scalar> FimContext<T> {
    pub fn new(grad_f: Vec<T>, h: T, sigma: T) -> Result<Self> {
        if grad_f.len() < 2 {
            return Err(ModShiftError::Config("FIM needs d >= 2".into()));
        }
        if !all_finite(&grad_f) {
            return Err(ModShiftError::Config("shift gradient has non-finite entries".into()));
        }
        if !(h > T::zero() && sigma > T::zero()) || !Float::is_finite(h) || !Float::is_finite(sigma) {
            return Err(ModShiftError::Config("channel gain and noise level must be positive".into()));
        }
        Ok(Self { grad_f, h, sigma })
    }

    pub fn d(&self) -> usize {
        self.grad_f.len()
    }

    pub fn grad_f(&self) -> &[T] {
        &self.grad_f
    }

    /// `2h²/σ²`.
    pub fn prefactor(&self) -> T {
        T::of(2.0) * self.h * self.h / (self.sigma * self.sigma)
    }
}

/// `J/c = I + 𝟙gᵀ + g𝟙ᵀ + d·ggᵀ`, exactly symmetric.
pub fn normalized_fim<T: Scalar>(grad_f: &[T]) -> DMatrix<T> {
    let d = grad_f.len();
    let dd = T::of(d as f64);
    DMatrix::from_fn(d, d, |i, j| {
        let id = if i == j { T::one() } else { T::zero() };
        let (gi, gj) = (grad_f[i], grad_f[j]);
        id + (gi + gj) + dd * (gi * gj)
    })
}

pub fn build_fim<T: Scalar>(ctx: &FimContext<T>) -> DMatrix<T> {
    normalized_fim(&ctx.grad_f) * ctx.prefactor()
}

/// Spectrum of [`build_fim`] in ascending order, valid only under
/// `∇fᵀ𝟙 = −1`.
pub fn closed_form_eigenvalues<T: Scalar>(ctx: &FimContext<T>) -> Result<Vec<T>> {
    if !validate_gamma(&ctx.grad_f) {
        return Err(ModShiftError::Domain(
            "closed-form spectrum requires the shift gradient to sum to -1".into(),
        ));
    }
    let c = ctx.prefactor();
    let d = ctx.d();
    let top = c * T::of(d as f64) * dot(&ctx.grad_f, &ctx.grad_f);
    let mut eig = Vec::with_capacity(d);
    eig.push(T::zero());
    eig.extend(std::iter::repeat_n(c, d - 2));
    eig.push(top);
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(eig)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn numeric_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    let mut eig: Vec<T> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eig
}

/// True iff the smallest eigenvalue magnitude is below `rel_tol` times the
/// largest.
pub fn is_singular<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> bool {
    let eig = numeric_eigenvalues(m);
    let smallest = eig.iter().fold(T::infinity(), |a, &b| Float::min(a, Float::abs(b)));
    let largest = eig.iter().fold(T::zero(), |a, &b| Float::max(a, Float::abs(b)));
    if largest == T::zero() {
        return true;
    }
    smallest < rel_tol * largest
}

/// `det(aI + UVᵀ) = aᵈ · det(I_m + VᵀU / a)` for `d × m` factors.
pub fn det_via_mdl<T: Scalar>(a: T, u: &DMatrix<T>, v: &DMatrix<T>) -> Result<T> {
    if a == T::zero() {
        return Err(ModShiftError::SingularBase);
    }
    if u.shape() != v.shape() {
        return Err(ModShiftError::DimensionMismatch {
            expected: u.ncols(),
            found: v.ncols(),
        });
    }
    let (d, m) = u.shape();
    let mut small = v.transpose() * u / a;
    for i in 0..m {
        small[(i, i)] += T::one();
    }
    Ok(Float::powi(a, d as i32) * small_determinant(small))
}

/// Gaussian elimination with partial pivoting; meant for the `m × m` core.
fn small_determinant<T: Scalar>(mut m: DMatrix<T>) -> T {
    let n = m.nrows();
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                Float::abs(m[(a, col)])
                    .partial_cmp(&Float::abs(m[(b, col)]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if m[(pivot, col)] == T::zero() {
            return T::zero();
        }
        if pivot != col {
            m.swap_rows(pivot, col);
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for r in col + 1..n {
            let factor = m[(r, col)] / p;
            for c in col..n {
                let delta = factor * m[(col, c)];
                m[(r, c)] -= delta;
            }
        }
    }
    det
}

/// The split `J/c − λI = A + UVᵀ` with `A = (1 − λ)I`,
/// `U = [g, 𝟙, √d·g]` and `V = [𝟙, g, √d·g]`.
pub fn mdl_factors<T: Scalar>(grad_f: &[T], lambda: T) -> (T, DMatrix<T>, DMatrix<T>) {
    let d = grad_f.len();
    let root_d = Float::sqrt(T::of(d as f64));
    let u = DMatrix::from_fn(d, 3, |i, j| match j {
        0 => grad_f[i],
        1 => T::one(),
        _ => root_d * grad_f[i],
    });
    let v = DMatrix::from_fn(d, 3, |i, j| match j {
        0 => T::one(),
        1 => grad_f[i],
        _ => root_d * grad_f[i],
    });
    (T::one() - lambda, u, v)
}

/// `det(J/c − λI)` through the matrix determinant lemma.
pub fn characteristic_via_mdl<T: Scalar>(grad_f: &[T], lambda: T) -> Result<T> {
    let (a, u, v) = mdl_factors(grad_f, lambda);
    det_via_mdl(a, &u, &v)
}

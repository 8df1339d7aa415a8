//! Over-the-air signals as exact superpositions.
//!
//! A transmitted vector is the sum of several components: the agent's
//! difference, a constant shift, injected noise, channel noise, and the
//! receiver's compensation. The components are kept separately and each
//! entry is read out as the correctly rounded value of the exact real sum.
//! Adding a component and later subtracting the same component therefore
//! cancels exactly, as it does for real-valued waveforms, instead of
//! leaving floating point residue behind.

use num_traits::Float;

use crate::error::{ModShiftError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Component<T> {
    Vector(Vec<T>),
    Uniform(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T> {
    d: usize,
    components: Vec<Component<T>>,
}

impl<T: Scalar> Signal<T> {
    pub fn from_vector(values: Vec<T>) -> Self {
        Self {
            d: values.len(),
            components: vec![Component::Vector(values)],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Superimposes a vector component.
    pub fn add_vector(mut self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.d {
            return Err(ModShiftError::DimensionMismatch {
                expected: self.d,
                found: values.len(),
            });
        }
        self.components.push(Component::Vector(values));
        Ok(self)
    }

    /// Superimposes `value · 𝟙`.
    pub fn add_uniform(mut self, value: T) -> Self {
        self.components.push(Component::Uniform(value));
        self
    }

    /// Correctly rounded entry `i`.
    pub fn entry(&self, i: usize) -> T {
        let mut acc = ExactSum::new();
        for c in &self.components {
            match c {
                Component::Vector(v) => acc.add(v[i]),
                Component::Uniform(u) => acc.add(*u),
            }
        }
        acc.value()
    }

    pub fn readout(&self) -> Vec<T> {
        (0..self.d).map(|i| self.entry(i)).collect()
    }
}

/// Error-free accumulation of floating point terms (Shewchuk's partials)
/// with a correctly rounded result.
#[derive(Debug, Clone, Default)]
pub struct ExactSum<T> {
    partials: Vec<T>,
}

impl<T: Scalar> ExactSum<T> {
    pub fn new() -> Self {
        Self {
            partials: Vec::with_capacity(4),
        }
    }

    pub fn add(&mut self, value: T) {
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if Float::abs(x) < Float::abs(y) {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != T::zero() {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> T {
        let p = &self.partials;
        let Some(&top) = p.last() else {
            return T::zero();
        };
        let mut hi = top;
        let mut lo = T::zero();
        let mut j = p.len() - 1;
        while j > 0 {
            j -= 1;
            let x = hi;
            let y = p[j];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != T::zero() {
                break;
            }
        }
        // Half-way correction: the remaining partials decide the rounding
        // direction when lo sits exactly on a tie.
        if j > 0 && ((lo < T::zero() && p[j - 1] < T::zero()) || (lo > T::zero() && p[j - 1] > T::zero())) {
            let y = lo + lo;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub fn exact_sum<T: Scalar>(terms: &[T]) -> T {
    let mut acc = ExactSum::new();
    terms.iter().for_each(|&t| acc.add(t));
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_exact() {
        // 0.1 + 0.2 - 0.2 is not 0.1 in sequential f64 arithmetic.
        assert_ne!(0.1_f64 + 0.2 - 0.2, 0.1);
        assert_eq!(exact_sum(&[0.1_f64, 0.2, -0.2]), 0.1);
        let s = Signal::from_vector(vec![0.1_f64, 3.0, -7.25]).add_uniform(0.2).add_uniform(-0.2);
        assert_eq!(s.readout(), vec![0.1, 3.0, -7.25]);
    }

    #[test]
    fn two_terms_match_ieee_addition() {
        for (a, b) in [(0.1_f64, 0.2), (1e16, 1.0), (-3.5, 1e-300), (1.0, -1.0)] {
            assert_eq!(exact_sum(&[a, b]), a + b);
        }
    }

    #[test]
    fn shifted_then_compensated_equals_unshifted_noisy() {
        let delta = vec![0.123_f64, -4.56, 7.89e-3];
        let noise = vec![0.31, -0.02, 1.7e-5];
        let plain = Signal::from_vector(delta.clone()).add_vector(noise.clone()).unwrap();
        let shifted = Signal::from_vector(delta)
            .add_uniform(-4.56)
            .add_vector(noise)
            .unwrap()
            .add_uniform(4.56);
        assert_eq!(plain.readout(), shifted.readout());
    }

    #[test]
    fn dimension_checked() {
        assert!(Signal::from_vector(vec![1.0_f64, 2.0]).add_vector(vec![1.0]).is_err());
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(exact_sum::<f64>(&[]), 0.0);
    }
}

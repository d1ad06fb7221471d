//! State-space model abstraction.

use std::ops::{Deref, DerefMut};

use crate::rng::StreamRng;

macro_rules! real_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

real_vector!(
    /// Hidden system state `x_t`.
    StateVector
);
real_vector!(
    /// Observation `y_t`.
    Observation
);

/// A state-space model with known parameters: prior, Markov transition kernel
/// and observation likelihood, plus a sampler for the observation law.
///
/// All methods take `&self` and must be callable from many workers at once.
pub trait StateSpaceModel: Sync {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn sample_prior(&self, rng: &mut StreamRng) -> StateVector;

    fn sample_transition(&self, x: &StateVector, rng: &mut StreamRng) -> StateVector;

    /// Density `p(y | x)` in linear space. Must be non-negative.
    fn likelihood(&self, y: &Observation, x: &StateVector) -> f64;

    /// `ln p(y | x)`. Used when linear-space weights underflow; models with a
    /// closed-form log-density should override it.
    fn log_likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        self.likelihood(y, x).ln()
    }

    /// Draw `y ~ p(y | x)`; must agree with [`StateSpaceModel::likelihood`].
    fn sample_observation(&self, x: &StateVector, rng: &mut StreamRng) -> Observation;
}

impl<M: StateSpaceModel + ?Sized> StateSpaceModel for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn sample_prior(&self, rng: &mut StreamRng) -> StateVector {
        (**self).sample_prior(rng)
    }
    fn sample_transition(&self, x: &StateVector, rng: &mut StreamRng) -> StateVector {
        (**self).sample_transition(x, rng)
    }
    fn likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        (**self).likelihood(y, x)
    }
    fn log_likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        (**self).log_likelihood(y, x)
    }
    fn sample_observation(&self, x: &StateVector, rng: &mut StreamRng) -> Observation {
        (**self).sample_observation(x, rng)
    }
}

/// Density of `N(mean, var)` at `y`.
#[inline]
pub fn gaussian_density(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[inline]
pub fn gaussian_log_density(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * d * d / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak() {
        let peak = gaussian_density(1.0, 1.0, 0.5);
        assert!((peak - 1.0 / (std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((gaussian_log_density(1.0, 1.0, 0.5) - peak.ln()).abs() < 1e-14);
    }

    #[test]
    fn vector_helpers() {
        let v = StateVector::new(vec![1.0, f64::NAN]);
        assert_eq!(v.dim(), 2);
        assert!(!v.is_finite());
        assert!(Observation::zeros(3).is_finite());
    }
}

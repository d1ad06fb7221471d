//! Scalar linear-Gaussian model and its exact Kalman recursion.
//!
//! `x_t = a x_{t-1} + u_t`, `u_t ~ N(0, q)`; `y_t = x_t + v_t`,
//! `v_t ~ N(0, r_obs)`; `x_0 ~ N(m0, v0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmcError};
use crate::model::{gaussian_density, gaussian_log_density, Observation, StateSpaceModel, StateVector};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearGaussianConfig {
    pub a: f64,
    pub q: f64,
    pub r_obs: f64,
    pub m0: f64,
    pub v0: f64,
}

impl Default for LinearGaussianConfig {
    fn default() -> Self {
        Self {
            a: 0.9,
            q: 1.0,
            r_obs: 0.1,
            m0: 0.0,
            v0: 1.0,
        }
    }
}

impl LinearGaussianConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("q", self.q), ("r_obs", self.r_obs), ("v0", self.v0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SmcError::Config {
                    key: format!("model.{key}"),
                    message: "must be > 0".into(),
                });
            }
        }
        if !self.a.is_finite() || !self.m0.is_finite() {
            return Err(SmcError::Config {
                key: "model.a".into(),
                message: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Fixed point of the predictive-variance Riccati recursion, if `|a| < 1`
    /// or the observations keep it bounded.
    pub fn stationary_state_sd(&self) -> f64 {
        if self.a.abs() < 1.0 {
            (self.q / (1.0 - self.a * self.a)).sqrt()
        } else {
            self.v0.sqrt().max(self.q.sqrt())
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearGaussian {
    config: LinearGaussianConfig,
}

impl LinearGaussian {
    pub fn new(config: LinearGaussianConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &LinearGaussianConfig {
        &self.config
    }
}

impl StateSpaceModel for LinearGaussian {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> StateVector {
        StateVector(vec![self.config.m0 + self.config.v0.sqrt() * rng.standard_normal()])
    }

    fn sample_transition(&self, x: &StateVector, rng: &mut StreamRng) -> StateVector {
        StateVector(vec![
            self.config.a * x[0] + self.config.q.sqrt() * rng.standard_normal(),
        ])
    }

    fn likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        gaussian_density(y[0], x[0], self.config.r_obs)
    }

    fn log_likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        gaussian_log_density(y[0], x[0], self.config.r_obs)
    }

    fn sample_observation(&self, x: &StateVector, rng: &mut StreamRng) -> Observation {
        Observation(vec![x[0] + self.config.r_obs.sqrt() * rng.standard_normal()])
    }
}

/// Exact Gaussian belief for the linear-Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanBelief {
    pub predictive_mean: f64,
    pub predictive_var: f64,
    pub filtered_mean: f64,
    pub filtered_var: f64,
}

impl KalmanBelief {
    /// Belief at `t = 0`: the prior, with no observation assimilated.
    pub fn prior(config: &LinearGaussianConfig) -> Self {
        Self {
            predictive_mean: config.m0,
            predictive_var: config.v0,
            filtered_mean: config.m0,
            filtered_var: config.v0,
        }
    }

    /// Only the prediction half of [`kalman_update`]: the belief about
    /// `x_t` given `y_{1:t-1}`.
    pub fn predict(&self, config: &LinearGaussianConfig) -> Self {
        Self {
            predictive_mean: config.a * self.filtered_mean,
            predictive_var: config.a * config.a * self.filtered_var + config.q,
            ..*self
        }
    }
}

/// Predict one step, then condition on `y`.
pub fn kalman_update(belief: &KalmanBelief, y: f64, config: &LinearGaussianConfig) -> KalmanBelief {
    let predicted = belief.predict(config);
    let s = predicted.predictive_var + config.r_obs;
    let gain = predicted.predictive_var / s;
    KalmanBelief {
        filtered_mean: predicted.predictive_mean + gain * (y - predicted.predictive_mean),
        filtered_var: (1.0 - gain) * predicted.predictive_var,
        ..predicted
    }
}

/// `p(y_t | y_{1:t-1}) = N(y; predictive_mean, predictive_var + r_obs)`,
/// using the predictive fields of `belief`.
pub fn kalman_predictive_density(belief: &KalmanBelief, y: f64, config: &LinearGaussianConfig) -> f64 {
    gaussian_density(y, belief.predictive_mean, belief.predictive_var + config.r_obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninformative_observation_keeps_belief() {
        let c = LinearGaussianConfig {
            a: 1.0,
            q: 1e-300,
            r_obs: 1e300,
            m0: 2.0,
            v0: 3.0,
        };
        let b = kalman_update(&KalmanBelief::prior(&c), 100.0, &c);
        assert!((b.filtered_mean - 2.0).abs() < 1e-12);
        assert!((b.filtered_var - 3.0).abs() < 1e-12);
    }

    #[test]
    fn memoryless_when_a_is_zero() {
        let c = LinearGaussianConfig {
            a: 0.0,
            q: 0.7,
            ..LinearGaussianConfig::default()
        };
        let mut b = KalmanBelief::prior(&c);
        for y in [3.0, -1.0, 10.0] {
            b = kalman_update(&b, y, &c);
            assert_eq!(b.predictive_mean, 0.0);
            assert_eq!(b.predictive_var, 0.7);
        }
    }

    #[test]
    fn riccati_fixed_point() {
        let c = LinearGaussianConfig {
            a: 0.9,
            q: 1.0,
            r_obs: 1.0,
            ..LinearGaussianConfig::default()
        };
        // Oracle: iterate the variance recursion alone to convergence.
        let mut p: f64 = 1.0;
        loop {
            let pred = 0.81 * p + 1.0;
            let next = pred - pred * pred / (pred + 1.0);
            if (next - p).abs() < 1e-12 {
                p = next;
                break;
            }
            p = next;
        }
        let mut b = KalmanBelief::prior(&c);
        for _ in 0..200 {
            b = kalman_update(&b, 0.0, &c);
        }
        assert!((b.filtered_var - p).abs() < 1e-10);
        // Closed form of the same fixed point.
        let pred = b.predictive_var;
        assert!((pred - (0.81 * p + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn predictive_density_peak_and_mass() {
        let c = LinearGaussianConfig::default();
        let b = kalman_update(&KalmanBelief::prior(&c), 0.4, &c).predict(&c);
        let var = b.predictive_var + c.r_obs;
        let peak = kalman_predictive_density(&b, b.predictive_mean, &c);
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * var).sqrt()).abs() < 1e-15);

        let sd = var.sqrt();
        let n = 20_000;
        let (lo, hi) = (b.predictive_mean - 10.0 * sd, b.predictive_mean + 10.0 * sd);
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * kalman_predictive_density(&b, lo + i as f64 * h, &c);
        }
        mass *= h;
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }
}

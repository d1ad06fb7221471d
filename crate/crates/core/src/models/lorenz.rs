//! Stochastic Lorenz 63 system, discretised by Euler–Maruyama and observed
//! in its first coordinate every `steps_per_obs` sub-steps.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmcError};
use crate::model::{gaussian_density, gaussian_log_density, Observation, StateSpaceModel, StateVector};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzConfig {
    pub s: f64,
    pub r: f64,
    pub b: f64,
    /// Euler–Maruyama step.
    pub delta: f64,
    pub steps_per_obs: usize,
    /// Variance of the additive observation noise.
    pub obs_noise_var: f64,
    pub prior_mean: [f64; 3],
    /// Per-coordinate prior variance.
    pub prior_var: f64,
    /// Multiplier on the `√Δ U` noise term; 0 gives the deterministic map.
    pub diffusion: f64,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            s: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
            delta: 1e-3,
            steps_per_obs: 200,
            obs_noise_var: 0.5,
            prior_mean: [-5.9165, -5.5233, 24.5723],
            prior_var: 10.0,
            diffusion: 1.0,
        }
    }
}

impl LorenzConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, message: &str| {
            Err(SmcError::Config {
                key: format!("model.{key}"),
                message: message.into(),
            })
        };
        if self.delta.is_nan() || self.delta <= 0.0 {
            return err("delta", "must be > 0");
        }
        if self.steps_per_obs == 0 {
            return err("steps_per_obs", "must be >= 1");
        }
        if self.obs_noise_var.is_nan() || self.obs_noise_var <= 0.0 {
            return err("obs_noise_var", "must be > 0");
        }
        if self.prior_var.is_nan() || self.prior_var <= 0.0 {
            return err("prior_var", "must be > 0");
        }
        if self.diffusion.is_nan() || self.diffusion < 0.0 {
            return err("diffusion", "must be >= 0");
        }
        Ok(())
    }
}

/// One Euler–Maruyama step with three independent standard-normal draws.
#[inline]
pub fn lorenz_step(x: [f64; 3], config: &LorenzConfig, rng: &mut StreamRng) -> [f64; 3] {
    let d = config.delta;
    let noise = config.diffusion * d.sqrt();
    let u1 = rng.standard_normal();
    let u2 = rng.standard_normal();
    let u3 = rng.standard_normal();
    [
        x[0] - d * config.s * (x[0] - x[1]) + noise * u1,
        x[1] + d * (config.r * x[0] - x[1] - x[0] * x[2]) + noise * u2,
        x[2] + d * (x[0] * x[1] - config.b * x[2]) + noise * u3,
    ]
}

/// `steps_per_obs` consecutive [`lorenz_step`] calls.
pub fn lorenz_transition(x: [f64; 3], config: &LorenzConfig, rng: &mut StreamRng) -> [f64; 3] {
    (0..config.steps_per_obs).fold(x, |acc, _| lorenz_step(acc, config, rng))
}

/// `y = x1 + v`, `v ~ N(0, σ²)`.
pub fn lorenz_observe(x: &[f64; 3], config: &LorenzConfig, rng: &mut StreamRng) -> f64 {
    x[0] + config.obs_noise_var.sqrt() * rng.standard_normal()
}

/// Normalised Gaussian density `N(y; x1, σ²)`.
pub fn lorenz_likelihood(y: f64, x: &[f64; 3], config: &LorenzConfig) -> f64 {
    gaussian_density(y, x[0], config.obs_noise_var)
}

fn as_array(x: &StateVector) -> [f64; 3] {
    [x[0], x[1], x[2]]
}

#[derive(Debug, Clone)]
pub struct Lorenz63 {
    config: LorenzConfig,
}

impl Lorenz63 {
    pub fn new(config: LorenzConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &LorenzConfig {
        &self.config
    }
}

impl StateSpaceModel for Lorenz63 {
    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> StateVector {
        let sd = self.config.prior_var.sqrt();
        StateVector(
            self.config
                .prior_mean
                .iter()
                .map(|m| m + sd * rng.standard_normal())
                .collect(),
        )
    }

    fn sample_transition(&self, x: &StateVector, rng: &mut StreamRng) -> StateVector {
        StateVector(lorenz_transition(as_array(x), &self.config, rng).to_vec())
    }

    fn likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        gaussian_density(y[0], x[0], self.config.obs_noise_var)
    }

    fn log_likelihood(&self, y: &Observation, x: &StateVector) -> f64 {
        gaussian_log_density(y[0], x[0], self.config.obs_noise_var)
    }

    fn sample_observation(&self, x: &StateVector, rng: &mut StreamRng) -> Observation {
        Observation(vec![lorenz_observe(&as_array(x), &self.config, rng)])
    }
}

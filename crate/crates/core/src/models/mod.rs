//! Built-in benchmark models.

mod linear_gaussian;
mod lorenz;

pub use linear_gaussian::{
    kalman_predictive_density, kalman_update, KalmanBelief, LinearGaussian, LinearGaussianConfig,
};
pub use lorenz::{
    lorenz_likelihood, lorenz_observe, lorenz_step, lorenz_transition, Lorenz63, LorenzConfig,
};

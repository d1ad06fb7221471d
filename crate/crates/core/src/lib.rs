//! Bootstrap particle filtering with online convergence assessment and
//! adaptive particle count.
//!
//! The filter ranks each actual observation among `K` fictitious draws from
//! its own predictive observation distribution. Over a window of `W` steps
//! those ranks should be uniform on `{0, ..., K}` when the particle
//! approximation is accurate; a chi-squared test of the window drives the
//! particle count up or down.
//!
//! * [`filter`]: the bootstrap filter stages.
//! * [`assessment`]: fictitious observations, rank statistics, window tests.
//! * [`adaptation`]: the particle-count controller and the adaptive driver.
//! * [`models`]: stochastic Lorenz 63 and a linear-Gaussian model with its
//!   Kalman recursion.
//! * [`harness`] and [`config`]: multi-run experiments and their inputs.
//! * [`verify`]: statistical self-checks.

pub mod adaptation;
pub mod assessment;
pub mod config;
pub mod error;
pub mod exec;
pub mod filter;
pub mod harness;
pub mod model;
pub mod models;
pub mod rng;
pub mod special;
pub mod verify;

pub use error::{Result, SmcError};
pub use exec::Execution;
pub use model::{Observation, StateSpaceModel, StateVector};
pub use rng::{RngStream, StreamRng};

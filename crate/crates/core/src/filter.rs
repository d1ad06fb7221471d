//! Bootstrap particle filter.
//!
//! A [`FilterState`] cycles through the stages
//! `Resampled -> predict -> Predicted -> weight -> Weighted -> resample -> Resampled`.
//! Calling an operation out of order returns [`SmcError::Protocol`].
//!
//! Per-particle randomness in [`FilterState::predict`] is drawn from
//! `rng.derive(m)` for particle `m`, so the caller only has to supply one
//! stream per step.

use crate::error::{Result, SmcError};
use crate::exec::Execution;
use crate::model::{Observation, StateSpaceModel, StateVector};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Predicted,
    Weighted,
    Resampled,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Predicted => "predicted",
            Stage::Weighted => "weighted",
            Stage::Resampled => "resampled",
        }
    }
}

/// Weighted particle approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<StateVector>,
    weights: Vec<f64>,
    stage: Stage,
}

impl ParticleSet {
    /// Equally weighted set in the given stage (`Predicted` or `Resampled`).
    pub fn uniform(particles: Vec<StateVector>, stage: Stage) -> Result<Self> {
        if particles.is_empty() {
            return Err(SmcError::InvalidConfiguration(
                "particle count must be at least 1".into(),
            ));
        }
        if stage == Stage::Weighted {
            return Err(SmcError::InvalidArgument(
                "a uniform set cannot be in the weighted stage; use ParticleSet::weighted".into(),
            ));
        }
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Ok(Self {
            particles,
            weights,
            stage,
        })
    }

    /// Weighted set. `weights` are normalised here.
    pub fn weighted(particles: Vec<StateVector>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(SmcError::InvalidArgument(format!(
                "need matching non-empty particle and weight arrays, got {} and {}",
                particles.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SmcError::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SmcError::InvalidArgument("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            particles,
            weights,
            stage: Stage::Weighted,
        })
    }

    pub fn particles(&self) -> &[StateVector] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Filter state: particle set, time index and the model it runs on.
#[derive(Debug, Clone)]
pub struct FilterState<'m, M: ?Sized> {
    set: ParticleSet,
    time_index: usize,
    model: &'m M,
    exec: Execution,
}

impl<'m, M: StateSpaceModel + ?Sized> FilterState<'m, M> {
    /// Draw `m0` i.i.d. particles from the prior. The set starts out
    /// resampled (uniform weights) at `t = 0`.
    pub fn initialize(model: &'m M, m0: usize, rng: RngStream) -> Result<Self> {
        Self::initialize_with(model, m0, rng, Execution::default())
    }

    pub fn initialize_with(
        model: &'m M,
        m0: usize,
        rng: RngStream,
        exec: Execution,
    ) -> Result<Self> {
        if m0 == 0 {
            return Err(SmcError::InvalidConfiguration(
                "initial particle count M0 must be at least 1".into(),
            ));
        }
        let particles = exec.map_indexed(m0, |m| {
            let mut r = rng.derive(m as u64).rng();
            model.sample_prior(&mut r)
        });
        Ok(Self {
            set: ParticleSet::uniform(particles, Stage::Resampled)?,
            time_index: 0,
            model,
            exec,
        })
    }

    /// Wrap an existing particle set, e.g. to test individual stages.
    pub fn from_parts(model: &'m M, set: ParticleSet, time_index: usize) -> Self {
        Self {
            set,
            time_index,
            model,
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn model(&self) -> &'m M {
        self.model
    }

    pub fn particle_set(&self) -> &ParticleSet {
        &self.set
    }

    pub fn particles(&self) -> &[StateVector] {
        &self.set.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.set.weights
    }

    pub fn stage(&self) -> Stage {
        self.set.stage
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    fn require(&self, operation: &'static str, expected: Stage) -> Result<()> {
        if self.set.stage != expected {
            return Err(SmcError::Protocol {
                operation,
                expected: expected.name(),
                found: self.set.stage.name(),
            });
        }
        Ok(())
    }

    /// Propagate every particle through the transition kernel.
    pub fn predict(&mut self, rng: RngStream) -> Result<()> {
        self.require("predict", Stage::Resampled)?;
        let model = self.model;
        let current = &self.set.particles;
        let next = self.exec.map_indexed(current.len(), |m| {
            let mut r = rng.derive(m as u64).rng();
            model.sample_transition(&current[m], &mut r)
        });
        self.set.particles = next;
        self.set.stage = Stage::Predicted;
        Ok(())
    }

    /// Normalised importance weights `w_m ∝ p(y | x̄_m)`. Advances the time
    /// index by one.
    ///
    /// Weights are computed in linear space; if the likelihood sum underflows
    /// they are recomputed from log-likelihoods. Only when every particle has
    /// zero likelihood does this fail with [`SmcError::DegenerateWeights`].
    pub fn weight(&mut self, y: &Observation) -> Result<()> {
        self.require("weight", Stage::Predicted)?;
        let model = self.model;
        let particles = &self.set.particles;
        let t = self.time_index + 1;

        let lik = self
            .exec
            .map_indexed(particles.len(), |m| model.likelihood(y, &particles[m]));
        let total: f64 = lik.iter().sum();

        let weights = if total.is_finite() && total >= f64::MIN_POSITIVE {
            lik.into_iter().map(|l| l / total).collect()
        } else {
            let logs = self
                .exec
                .map_indexed(particles.len(), |m| model.log_likelihood(y, &particles[m]));
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(SmcError::DegenerateWeights { time_index: t });
            }
            let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let s: f64 = scaled.iter().sum();
            scaled.into_iter().map(|w| w / s).collect()
        };

        self.set.weights = weights;
        self.set.stage = Stage::Weighted;
        self.time_index = t;
        Ok(())
    }

    /// Multinomial resampling of `m_next` offspring. `m_next` may differ from
    /// the current particle count; this is how a new count takes effect.
    pub fn resample_multinomial(&mut self, m_next: usize, rng: RngStream) -> Result<()> {
        self.require("resample", Stage::Weighted)?;
        if m_next == 0 {
            return Err(SmcError::InvalidConfiguration(
                "resampled particle count must be at least 1".into(),
            ));
        }
        let ancestors = multinomial_ancestors(&self.set.weights, m_next, rng);
        let particles = ancestors
            .into_iter()
            .map(|k| self.set.particles[k].clone())
            .collect();
        self.set = ParticleSet::uniform(particles, Stage::Resampled)?;
        Ok(())
    }

    /// Particle approximation of the predictive observation density,
    /// `(1/M) Σ_m p(y | x̄_m)`.
    pub fn predictive_density_at(&self, y: &Observation) -> Result<f64> {
        self.require("predictive_density_at", Stage::Predicted)?;
        let model = self.model;
        let particles = &self.set.particles;
        let lik = self
            .exec
            .map_indexed(particles.len(), |m| model.likelihood(y, &particles[m]));
        Ok(lik.iter().sum::<f64>() / particles.len() as f64)
    }

    /// Posterior-mean estimate from the weighted set (before resampling) or
    /// the uniform resampled set.
    pub fn estimate_mean(&self) -> Result<StateVector> {
        if self.set.stage == Stage::Predicted {
            return Err(SmcError::Protocol {
                operation: "estimate_mean",
                expected: "weighted or resampled",
                found: "predicted",
            });
        }
        let dim = self.set.particles[0].dim();
        let mut mean = vec![0.0; dim];
        for (x, &w) in self.set.particles.iter().zip(&self.set.weights) {
            for (acc, v) in mean.iter_mut().zip(x.iter()) {
                *acc += w * v;
            }
        }
        Ok(StateVector(mean))
    }
}

/// Draw `n` i.i.d. ancestor indices with probabilities proportional to
/// `weights`, by inverse-CDF lookup on the running sum.
pub fn multinomial_ancestors(weights: &[f64], n: usize, rng: RngStream) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let last = weights.len() - 1;
    let mut r = rng.rng();
    (0..n)
        .map(|_| {
            let u = r.uniform() * acc;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

//! Particle-count adaptation driven by the window p-values.
//!
//! Every `W` steps the assessment p-value is compared with the operation
//! range `[p_low, p_high]`: at or below `p_low` the count grows by
//! `growth_factor`, at or above `p_high` it shrinks by `shrink_factor`, and
//! it is clamped to `[m_min, m_max]`. The new count is applied at the next
//! resampling step.

use serde::{Deserialize, Serialize};

use crate::assessment::{draw_fictitious, marginal_statistics, Assessor, MarginalAssessor};
use crate::error::{Result, SmcError};
use crate::exec::Execution;
use crate::filter::FilterState;
use crate::model::{Observation, StateSpaceModel, StateVector};
use crate::rng::RngStream;

/// Parameters of the adaptive scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub m0: usize,
    pub m_min: usize,
    pub m_max: usize,
    /// Fictitious observations per step.
    pub k: usize,
    /// Window length.
    pub w: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub growth_factor: f64,
    pub shrink_factor: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            m0: 1 << 15,
            m_min: 1 << 5,
            m_max: 1 << 15,
            k: 7,
            w: 20,
            p_low: 0.3,
            p_high: 0.7,
            growth_factor: 2.0,
            shrink_factor: 0.5,
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> SmcError {
    SmcError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl AdaptiveConfig {
    /// A configuration that never changes the particle count but still runs
    /// the assessment.
    pub fn fixed(m: usize, k: usize, w: usize) -> Self {
        Self {
            m0: m,
            m_min: m,
            m_max: m,
            k,
            w,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("adaptation.{k}");
        for (name, v) in [
            ("m0", self.m0),
            ("m_min", self.m_min),
            ("m_max", self.m_max),
            ("k", self.k),
            ("w", self.w),
        ] {
            if v == 0 {
                return Err(config_error(&key(name), "must be a positive integer"));
            }
        }
        if self.m_min > self.m0 {
            return Err(config_error(&key("m0"), "m_min <= m0 <= m_max violated"));
        }
        if self.m0 > self.m_max {
            return Err(config_error(&key("m0"), "m_min <= m0 <= m_max violated"));
        }
        for (name, v) in [("p_low", self.p_low), ("p_high", self.p_high)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_error(&key(name), "must lie in (0, 1)"));
            }
        }
        if self.p_low >= self.p_high {
            return Err(config_error(&key("p_low"), "p_low < p_high violated"));
        }
        if !(self.growth_factor > 1.0 && self.growth_factor.is_finite()) {
            return Err(config_error(&key("growth_factor"), "must be > 1"));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(config_error(&key("shrink_factor"), "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Increase,
    Decrease,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationDecision {
    pub action: Action,
    pub m_next: usize,
    pub p_value: f64,
    /// The rule's target fell outside `[m_min, m_max]`.
    pub clamped: bool,
}

fn scaled(m: usize, factor: f64) -> usize {
    ((m as f64 * factor).round() as usize).max(1)
}

/// Map one window p-value to the next particle count.
///
/// A rule that is clamped back onto the current count reports
/// [`Action::Hold`] with `clamped = true`.
pub fn decide(config: &AdaptiveConfig, m_current: usize, p_value: f64) -> Result<AdaptationDecision> {
    if !(0.0..=1.0).contains(&p_value) {
        return Err(SmcError::InvalidArgument(format!(
            "p-value must lie in [0, 1], got {p_value}"
        )));
    }
    if m_current < config.m_min || m_current > config.m_max {
        return Err(SmcError::InvalidArgument(format!(
            "current particle count {m_current} outside [{}, {}]",
            config.m_min, config.m_max
        )));
    }
    let (m_next, clamped) = if p_value <= config.p_low {
        let target = scaled(m_current, config.growth_factor);
        (target.min(config.m_max), target > config.m_max)
    } else if p_value >= config.p_high {
        let target = scaled(m_current, config.shrink_factor);
        (target.max(config.m_min), target < config.m_min)
    } else {
        (m_current, false)
    };
    let action = match m_next.cmp(&m_current) {
        std::cmp::Ordering::Greater => Action::Increase,
        std::cmp::Ordering::Less => Action::Decrease,
        std::cmp::Ordering::Equal => Action::Hold,
    };
    Ok(AdaptationDecision {
        action,
        m_next,
        p_value,
        clamped,
    })
}

/// Per-step output of the adaptive filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub time_index: usize,
    /// Posterior mean from the weighted particles.
    pub estimate: StateVector,
    /// Particle count used at this step.
    pub m_used: usize,
    /// Present on assessment steps (`t` a multiple of `W`).
    pub p_value: Option<f64>,
    pub hellinger: Option<f64>,
    /// Rank of the first observation coordinate.
    pub rank_value: usize,
}

const INIT_STREAM: u64 = u64::MAX;
const RESAMPLE_STREAM: u64 = 0;
const PREDICT_STREAM: u64 = 1;
const FICTITIOUS_STREAM: u64 = 2;

/// Bootstrap filter with online assessment and particle-count adaptation.
pub fn run_adaptive_filter<M: StateSpaceModel + ?Sized>(
    model: &M,
    config: &AdaptiveConfig,
    observations: &[Observation],
    rng: RngStream,
    exec: Execution,
) -> Result<Vec<FilterStep>> {
    let mut assessor = MarginalAssessor::new(model.obs_dim(), config.w, config.k)?;
    run_adaptive_filter_with(model, config, observations, rng, exec, &mut assessor)
}

/// [`run_adaptive_filter`] with a caller-supplied assessor.
pub fn run_adaptive_filter_with<M: StateSpaceModel + ?Sized, A: Assessor + ?Sized>(
    model: &M,
    config: &AdaptiveConfig,
    observations: &[Observation],
    rng: RngStream,
    exec: Execution,
    assessor: &mut A,
) -> Result<Vec<FilterStep>> {
    config.validate()?;
    if observations.is_empty() {
        return Err(SmcError::InvalidArgument(
            "observation sequence is empty".into(),
        ));
    }

    let mut state = FilterState::initialize_with(model, config.m0, rng.derive(INIT_STREAM), exec)?;
    let mut m_n = config.m0;
    let mut steps = Vec::with_capacity(observations.len());

    for (i, y) in observations.iter().enumerate() {
        let t = i + 1;
        let s = rng.derive(t as u64);
        if t > 1 {
            state.resample_multinomial(m_n, s.derive(RESAMPLE_STREAM))?;
        }
        let m_used = state.len();
        state.predict(s.derive(PREDICT_STREAM))?;
        let fictitious = draw_fictitious(&state, config.k, s.derive(FICTITIOUS_STREAM))?;
        let ranks = marginal_statistics(y, &fictitious, t)?;
        state.weight(y)?;
        let estimate = state.estimate_mean()?;

        let (p_value, hellinger) = match assessor.observe(&ranks)? {
            Some(outcome) => {
                m_n = decide(config, m_n, outcome.p_value)?.m_next;
                (Some(outcome.p_value), Some(outcome.hellinger))
            }
            None => (None, None),
        };

        steps.push(FilterStep {
            time_index: t,
            estimate,
            m_used,
            p_value,
            hellinger,
            rank_value: ranks[0].value,
        });
    }
    Ok(steps)
}

//! Online convergence assessment.
//!
//! At each step the filter's predictive observation mixture is sampled `K`
//! times ("fictitious" observations) and the actual observation is ranked
//! against them. If the filter has converged the rank is uniform on
//! `{0, ..., K}`; every `W` steps a Pearson chi-squared test checks the
//! window of ranks for uniformity.

use crate::error::{Result, SmcError};
use crate::filter::{FilterState, Stage};
use crate::model::{Observation, StateSpaceModel};
use crate::rng::RngStream;
use crate::special::chi_squared_p_value;

/// Rank of an actual observation (one coordinate) among `K` fictitious ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankStatistic {
    pub value: usize,
    pub time_index: usize,
    pub dimension_index: usize,
}

/// Outcome of one window test.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentResult {
    pub chi2: f64,
    pub p_value: f64,
    pub hellinger: f64,
    /// `O_j`, the number of window entries with rank `j`.
    pub bin_counts: Vec<usize>,
}

/// Draw `k` observations from the particle predictive mixture: pick an
/// ancestor uniformly among the predicted particles, then sample
/// `p(y | x̄_ancestor)`.
pub fn draw_fictitious<M: StateSpaceModel + ?Sized>(
    state: &FilterState<'_, M>,
    k: usize,
    rng: RngStream,
) -> Result<Vec<Observation>> {
    if state.stage() != Stage::Predicted {
        return Err(SmcError::Protocol {
            operation: "draw_fictitious",
            expected: "predicted",
            found: match state.stage() {
                Stage::Predicted => "predicted",
                Stage::Weighted => "weighted",
                Stage::Resampled => "resampled",
            },
        });
    }
    if k == 0 {
        return Err(SmcError::InvalidArgument(
            "number of fictitious observations K must be at least 1".into(),
        ));
    }
    let particles = state.particles();
    let model = state.model();
    let mut r = rng.rng();
    Ok((0..k)
        .map(|_| {
            let j = r.index(particles.len());
            model.sample_observation(&particles[j], &mut r)
        })
        .collect())
}

/// Number of fictitious values strictly below `y`. Ties count as not below.
pub fn rank_statistic(y: f64, fictitious: &[f64]) -> usize {
    fictitious.iter().filter(|&&v| v < y).count()
}

/// Coordinate-wise ranks of `y` against `fictitious`.
pub fn marginal_statistics(
    y: &Observation,
    fictitious: &[Observation],
    time_index: usize,
) -> Result<Vec<RankStatistic>> {
    if let Some(bad) = fictitious.iter().find(|f| f.dim() != y.dim()) {
        return Err(SmcError::InvalidArgument(format!(
            "fictitious observation has dimension {}, expected {}",
            bad.dim(),
            y.dim()
        )));
    }
    Ok((0..y.dim())
        .map(|d| RankStatistic {
            value: fictitious.iter().filter(|f| f[d] < y[d]).count(),
            time_index,
            dimension_index: d,
        })
        .collect())
}

/// Pearson statistic `Σ_j (O_j - E_j)² / E_j` against the uniform pmf, with
/// `E_j = W / (K + 1)` and `W = Σ_j O_j`.
pub fn pearson_statistic(bin_counts: &[usize]) -> f64 {
    let w: usize = bin_counts.iter().sum();
    let expected = w as f64 / bin_counts.len() as f64;
    bin_counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Hellinger distance between the empirical pmf `O_j / W` and the uniform pmf
/// on `bin_counts.len()` points.
pub fn hellinger_to_uniform(bin_counts: &[usize], w: usize) -> Result<f64> {
    let total: usize = bin_counts.iter().sum();
    if total != w || w == 0 {
        return Err(SmcError::InvalidArgument(format!(
            "bin counts sum to {total}, expected window length {w}"
        )));
    }
    let q = (1.0 / bin_counts.len() as f64).sqrt();
    let s: f64 = bin_counts
        .iter()
        .map(|&o| {
            let d = (o as f64 / w as f64).sqrt() - q;
            d * d
        })
        .sum();
    Ok((0.5 * s).sqrt().clamp(0.0, 1.0))
}

/// Non-overlapping window of `W` rank statistics with values in `0..=K`.
#[derive(Debug, Clone)]
pub struct AssessmentWindow {
    capacity: usize,
    k: usize,
    entries: Vec<RankStatistic>,
}

impl AssessmentWindow {
    pub fn new(capacity: usize, k: usize) -> Result<Self> {
        if capacity == 0 || k == 0 {
            return Err(SmcError::InvalidConfiguration(format!(
                "window length W and fictitious count K must be positive (W = {capacity}, K = {k})"
            )));
        }
        Ok(Self {
            capacity,
            k,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[RankStatistic] {
        &self.entries
    }

    pub fn bin_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k + 1];
        for e in &self.entries {
            counts[e.value] += 1;
        }
        counts
    }

    /// Chi-squared test of the full window, `K` degrees of freedom.
    pub fn test(&self) -> Result<AssessmentResult> {
        if !self.is_full() {
            return Err(SmcError::Protocol {
                operation: "chi_squared_statistic",
                expected: "full window",
                found: "partial window",
            });
        }
        let bin_counts = self.bin_counts();
        let chi2 = pearson_statistic(&bin_counts);
        let p_value = chi_squared_p_value(chi2, self.k)?;
        let hellinger = hellinger_to_uniform(&bin_counts, self.capacity)?;
        Ok(AssessmentResult {
            chi2,
            p_value,
            hellinger,
            bin_counts,
        })
    }

    /// Append one statistic. Once `W` have accumulated, test them and start
    /// a fresh window.
    pub fn push_and_maybe_test(&mut self, a: RankStatistic) -> Result<Option<AssessmentResult>> {
        if a.value > self.k {
            return Err(SmcError::InvalidArgument(format!(
                "rank {} outside 0..={}",
                a.value, self.k
            )));
        }
        self.entries.push(a);
        if !self.is_full() {
            return Ok(None);
        }
        let result = self.test()?;
        self.entries.clear();
        Ok(Some(result))
    }
}

/// Combined outcome of one assessment across observation coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    /// Minimum p-value across coordinates.
    pub p_value: f64,
    /// Hellinger distance of the coordinate that attained the minimum.
    pub hellinger: f64,
    pub per_dimension: Vec<AssessmentResult>,
}

/// Source of convergence verdicts consumed by the adaptive driver.
pub trait Assessor {
    /// Feed the ranks of one step; returns an outcome when a test is due.
    fn observe(&mut self, ranks: &[RankStatistic]) -> Result<Option<WindowOutcome>>;
}

/// One chi-squared window per observation coordinate, combined by taking
/// the minimum p-value.
#[derive(Debug, Clone)]
pub struct MarginalAssessor {
    windows: Vec<AssessmentWindow>,
}

impl MarginalAssessor {
    pub fn new(obs_dim: usize, w: usize, k: usize) -> Result<Self> {
        let windows = (0..obs_dim)
            .map(|_| AssessmentWindow::new(w, k))
            .collect::<Result<_>>()?;
        Ok(Self { windows })
    }
}

impl Assessor for MarginalAssessor {
    fn observe(&mut self, ranks: &[RankStatistic]) -> Result<Option<WindowOutcome>> {
        if ranks.len() != self.windows.len() {
            return Err(SmcError::InvalidArgument(format!(
                "got {} rank statistics for {} observation coordinates",
                ranks.len(),
                self.windows.len()
            )));
        }
        let mut results = Vec::new();
        for (window, &a) in self.windows.iter_mut().zip(ranks) {
            if let Some(r) = window.push_and_maybe_test(a)? {
                results.push(r);
            }
        }
        // Windows advance in lockstep, so either all coordinates tested or none.
        if results.is_empty() {
            return Ok(None);
        }
        let best = results
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.p_value.total_cmp(&b.1.p_value))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(Some(WindowOutcome {
            p_value: results[best].p_value,
            hellinger: results[best].hellinger,
            per_dimension: results,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(value: usize) -> RankStatistic {
        RankStatistic {
            value,
            time_index: 0,
            dimension_index: 0,
        }
    }

    fn window_from(counts: &[usize]) -> AssessmentWindow {
        let w: usize = counts.iter().sum();
        let mut win = AssessmentWindow::new(w, counts.len() - 1).unwrap();
        for (j, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                win.entries.push(stat(j));
            }
        }
        win
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_statistic(5.0, &[1.0, 2.0, 3.0]), 3);
        assert_eq!(rank_statistic(0.0, &[1.0, 2.0, 3.0]), 0);
        assert_eq!(rank_statistic(2.0, &[1.0, 2.0, 3.0]), 1);
    }

    #[test]
    fn chi_squared_hand_cases() {
        assert_eq!(window_from(&[2; 8]).test().unwrap().chi2, 0.0);
        assert_eq!(
            window_from(&[4, 0, 2, 2, 2, 2, 2, 2]).test().unwrap().chi2,
            4.0
        );
        let r = window_from(&[20, 0, 0, 0, 0, 0, 0, 0]).test().unwrap();
        assert!((r.chi2 - 140.0).abs() < 1e-12);
        assert_eq!(r.bin_counts.iter().sum::<usize>(), 20);
    }

    #[test]
    fn partial_window_cannot_be_tested() {
        let mut w = AssessmentWindow::new(4, 3).unwrap();
        w.entries.push(stat(1));
        assert!(matches!(w.test(), Err(SmcError::Protocol { .. })));
    }

    #[test]
    fn hellinger_values() {
        assert_eq!(hellinger_to_uniform(&[3; 8], 24).unwrap(), 0.0);
        // All mass in one of 8 bins: H² = ½[(1 - √⅛)² + 7·⅛] = 1 - √⅛.
        let oracle = (1.0 - (1.0f64 / 8.0).sqrt()).sqrt();
        let h = hellinger_to_uniform(&[0, 0, 20, 0, 0, 0, 0, 0], 20).unwrap();
        assert!((h - oracle).abs() < 1e-15);
        assert!((h - 0.804_019_7).abs() < 1e-6);
        assert!(hellinger_to_uniform(&[1, 2], 4).is_err());
    }

    #[test]
    fn window_fires_every_w_pushes() {
        let mut w = AssessmentWindow::new(20, 7).unwrap();
        for i in 0..19 {
            assert!(w.push_and_maybe_test(stat(i % 8)).unwrap().is_none());
        }
        let first = w.push_and_maybe_test(stat(19 % 8)).unwrap().unwrap();
        assert!(w.is_empty());
        for i in 0..19 {
            assert!(w.push_and_maybe_test(stat(i % 8)).unwrap().is_none());
        }
        let second = w.push_and_maybe_test(stat(19 % 8)).unwrap().unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn out_of_range_rank_rejected() {
        let mut w = AssessmentWindow::new(5, 3).unwrap();
        assert!(w.push_and_maybe_test(stat(4)).is_err());
    }

    #[test]
    fn marginal_reduces_to_scalar() {
        let y = Observation(vec![0.5]);
        let fict: Vec<_> = [0.1, 0.7, 0.2].iter().map(|&v| Observation(vec![v])).collect();
        let s = marginal_statistics(&y, &fict, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].value, rank_statistic(0.5, &[0.1, 0.7, 0.2]));
        assert_eq!(s[0].time_index, 3);
    }

    #[test]
    fn marginal_per_coordinate_and_equivariant() {
        let y = Observation(vec![0.5, -1.0]);
        let fict = vec![
            Observation(vec![0.1, -2.0]),
            Observation(vec![0.9, -0.5]),
            Observation(vec![0.3, -3.0]),
        ];
        let s = marginal_statistics(&y, &fict, 0).unwrap();
        assert_eq!(s[0].value, rank_statistic(0.5, &[0.1, 0.9, 0.3]));
        assert_eq!(s[1].value, rank_statistic(-1.0, &[-2.0, -0.5, -3.0]));
        assert_eq!(s[1].dimension_index, 1);

        let swap = |o: &Observation| Observation(vec![o[1], o[0]]);
        let swapped: Vec<_> = fict.iter().map(swap).collect();
        let t = marginal_statistics(&swap(&y), &swapped, 0).unwrap();
        assert_eq!(t[0].value, s[1].value);
        assert_eq!(t[1].value, s[0].value);
    }

    #[test]
    fn marginal_assessor_takes_minimum_p() {
        let mut a = MarginalAssessor::new(2, 8, 7).unwrap();
        let mut out = None;
        for i in 0..8 {
            let ranks = [
                RankStatistic {
                    value: i,
                    time_index: i,
                    dimension_index: 0,
                },
                RankStatistic {
                    value: 0,
                    time_index: i,
                    dimension_index: 1,
                },
            ];
            out = a.observe(&ranks).unwrap();
        }
        let out = out.unwrap();
        assert_eq!(out.per_dimension.len(), 2);
        assert_eq!(out.per_dimension[0].p_value, 1.0);
        assert!(out.p_value < 1e-6);
        assert_eq!(out.p_value, out.per_dimension[1].p_value);
        assert_eq!(out.hellinger, out.per_dimension[1].hellinger);
    }
}

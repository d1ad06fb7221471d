//! Statistical self-checks, shared by the `verify` command and the
//! acceptance tests.
//!
//! Each suite returns a [`SuiteReport`] with the observed statistic and the
//! threshold it was judged against. The oracles here (a brute-force grid
//! filter, direct Gaussian-mass evaluation) do not reuse the filter or Kalman
//! code they check.

use std::fmt;
use std::time::Instant;

use crate::assessment::{draw_fictitious, pearson_statistic, rank_statistic, AssessmentWindow, RankStatistic};
use crate::error::Result;
use crate::exec::Execution;
use crate::filter::FilterState;
use crate::harness::generate_truth_and_observations;
use crate::model::{gaussian_density, Observation};
use crate::models::{kalman_update, KalmanBelief, LinearGaussian, LinearGaussianConfig};
use crate::rng::RngStream;
use crate::special::{chi_squared_p_value, gamma_p};

/// Rank rule used by the exactness suite. [`RankRule::OffByOne`] is a fault
/// injection hook that must make that suite fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankRule {
    #[default]
    StrictLess,
    OffByOne,
}

impl RankRule {
    fn rank(self, y: f64, fictitious: &[f64]) -> usize {
        let r = rank_statistic(y, fictitious);
        match self {
            RankRule::StrictLess => r,
            RankRule::OffByOne => (r + 1).min(fictitious.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: String,
    pub detail: String,
    pub elapsed_seconds: f64,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: statistic = {:.6}, threshold {} ({}; {:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.detail,
            self.elapsed_seconds
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, f64, String, String)>) -> Result<SuiteReport> {
    let start = Instant::now();
    let (passed, statistic, threshold, detail) = f()?;
    Ok(SuiteReport {
        name,
        passed,
        statistic,
        threshold,
        detail,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Standard normal CDF via `P(1/2, z²/2)`.
pub fn normal_cdf(z: f64) -> f64 {
    let half = 0.5 * gamma_p(0.5, 0.5 * z * z);
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Rank uniformity with actual and fictitious values drawn i.i.d. from one
/// continuous law: chi-squared goodness of fit with `K` degrees of freedom.
pub fn rank_exactness(seed: u64, rule: RankRule) -> Result<SuiteReport> {
    const K: usize = 7;
    const TRIALS: usize = 100_000;
    const ALPHA: f64 = 0.01;
    timed("rank exactness (K = 7, 1e5 trials)", || {
        let mut rng = RngStream::new(seed).derive(0x5052_4f50).rng();
        let mut counts = [0usize; K + 1];
        let mut fict = [0.0; K];
        for _ in 0..TRIALS {
            // Exponential variates: a continuous law other than the normal.
            let y = -(1.0 - rng.uniform()).ln();
            for f in fict.iter_mut() {
                *f = -(1.0 - rng.uniform()).ln();
            }
            counts[rule.rank(y, &fict)] += 1;
        }
        let chi2 = pearson_statistic(&counts);
        let p = chi_squared_p_value(chi2, K)?;
        Ok((
            p > ALPHA,
            p,
            format!("p-value > {ALPHA}"),
            format!("chi2 = {chi2:.3}, counts = {counts:?}"),
        ))
    })
}

fn tv_to_uniform(counts: &[usize]) -> (f64, f64) {
    let n: usize = counts.iter().sum();
    let n = n as f64;
    let q = 1.0 / counts.len() as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let tv = 0.5 * p.iter().map(|pj| (pj - q).abs()).sum::<f64>();
    // Delta-method standard error with gradient ½ sign(p_j - q).
    let g: Vec<f64> = p.iter().map(|pj| 0.5 * (pj - q).signum()).collect();
    let mean_g: f64 = g.iter().zip(&p).map(|(gj, pj)| gj * pj).sum();
    let var: f64 = g.iter().zip(&p).map(|(gj, pj)| pj * (gj - mean_g).powi(2)).sum::<f64>() / n;
    (tv, var.sqrt())
}

/// Settings of the linear-Gaussian oracle experiments.
pub fn oracle_model() -> LinearGaussianConfig {
    LinearGaussianConfig::default()
}

/// Run a fresh `m`-particle filter over `obs` and stop after the prediction
/// step of time `obs.len() + 1`.
fn predictive_cloud<'m>(
    model: &'m LinearGaussian,
    obs: &[Observation],
    m: usize,
    rng: RngStream,
) -> Result<FilterState<'m, LinearGaussian>> {
    let mut f = FilterState::initialize_with(model, m, rng.derive(u64::MAX), Execution::Sequential)?;
    for (i, y) in obs.iter().enumerate() {
        let s = rng.derive(i as u64 + 1);
        f.predict(s.derive(1))?;
        f.weight(y)?;
        f.resample_multinomial(m, s.derive(0))?;
    }
    f.predict(rng.derive(obs.len() as u64 + 1).derive(1))?;
    Ok(f)
}

fn kalman_predictive_at(cfg: &LinearGaussianConfig, obs: &[Observation]) -> KalmanBelief {
    let mut b = KalmanBelief::prior(cfg);
    for y in obs {
        b = kalman_update(&b, y[0], cfg);
    }
    b.predict(cfg)
}

/// Per-`M` total-variation distance of the rank pmf at a fixed time, with
/// the actual observation drawn from the exact predictive law.
pub fn rank_tv_by_particle_count(
    seed: u64,
    particle_counts: &[usize],
    replicates: usize,
    t: usize,
    exec: Execution,
) -> Result<Vec<(usize, f64, f64)>> {
    const K: usize = 7;
    let cfg = oracle_model();
    let model = LinearGaussian::new(cfg.clone())?;
    let root = RngStream::new(seed).derive(0x5448_4d32);
    let (_, obs) = generate_truth_and_observations(&model, t - 1, root.derive(0))?;
    let exact = kalman_predictive_at(&cfg, &obs);
    let y_sd = (exact.predictive_var + cfg.r_obs).sqrt();

    particle_counts
        .iter()
        .map(|&m| {
            let reps = root.derive(m as u64);
            let ranks = exec.map_coarse(replicates, |r| -> Result<usize> {
                let s = reps.derive(r as u64);
                let f = predictive_cloud(&model, &obs, m, s.derive(0))?;
                let fict = draw_fictitious(&f, K, s.derive(1))?;
                let mut yr = s.derive(2).rng();
                let y = exact.predictive_mean + y_sd * yr.standard_normal();
                let values: Vec<f64> = fict.iter().map(|o| o[0]).collect();
                Ok(rank_statistic(y, &values))
            });
            let mut counts = vec![0usize; K + 1];
            for r in ranks {
                counts[r?] += 1;
            }
            let (tv, se) = tv_to_uniform(&counts);
            Ok((m, tv, se))
        })
        .collect()
}

/// Rank pmf approaches uniform as `M` grows: TV at `M = 10` is at least
/// twice TV at `M = 1000` and the sequence is non-increasing, both within
/// two standard errors.
pub fn rank_convergence(seed: u64, exec: Execution) -> Result<SuiteReport> {
    timed("rank pmf convergence in M (linear-Gaussian, t = 10)", || {
        let rows = rank_tv_by_particle_count(seed, &[10, 100, 1000], 10_000, 10, exec)?;
        let (tv_lo, se_lo) = (rows[0].1, rows[0].2);
        let (tv_hi, se_hi) = (rows[2].1, rows[2].2);
        let margin = tv_lo - 2.0 * tv_hi;
        let margin_se = (se_lo.powi(2) + 4.0 * se_hi.powi(2)).sqrt();
        let factor_ok = margin >= -2.0 * margin_se;
        let monotone = rows
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
        let detail = rows
            .iter()
            .map(|(m, tv, se)| format!("M={m}: TV={tv:.4}±{se:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok((
            factor_ok && monotone,
            tv_lo / tv_hi,
            "TV(10) >= 2 TV(1000) and non-increasing, within 2 s.e.".into(),
            format!("{detail}; monotone = {monotone}"),
        ))
    })
}

/// Mean absolute error of the particle estimate of `P(y_t ∈ [lo, hi] | y_{1:t-1})`
/// against the Kalman value, for each `M`.
pub fn interval_mass_errors(
    seed: u64,
    particle_counts: &[usize],
    runs: usize,
    t: usize,
    exec: Execution,
) -> Result<Vec<(usize, f64)>> {
    let cfg = oracle_model();
    let model = LinearGaussian::new(cfg.clone())?;
    let root = RngStream::new(seed).derive(0x5448_4d31);
    let (_, obs) = generate_truth_and_observations(&model, t - 1, root.derive(0))?;
    let exact = kalman_predictive_at(&cfg, &obs);
    let y_sd = (exact.predictive_var + cfg.r_obs).sqrt();
    let (lo, hi) = (exact.predictive_mean - y_sd, exact.predictive_mean + 0.5 * y_sd);
    let truth = normal_cdf((hi - exact.predictive_mean) / y_sd) - normal_cdf((lo - exact.predictive_mean) / y_sd);
    let r_sd = cfg.r_obs.sqrt();

    particle_counts
        .iter()
        .map(|&m| {
            let reps = root.derive(m as u64);
            let errors = exec.map_coarse(runs, |r| -> Result<f64> {
                let f = predictive_cloud(&model, &obs, m, reps.derive(r as u64))?;
                let mass = f
                    .particles()
                    .iter()
                    .map(|x| normal_cdf((hi - x[0]) / r_sd) - normal_cdf((lo - x[0]) / r_sd))
                    .sum::<f64>()
                    / m as f64;
                Ok((mass - truth).abs())
            });
            let total = errors.into_iter().sum::<Result<f64>>()?;
            Ok((m, total / runs as f64))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Error of the predictive interval mass decays like `M^(-1/2)`.
pub fn convergence_rate(seed: u64, exec: Execution) -> Result<SuiteReport> {
    timed("interval-mass error rate (M = 1e2..1e4, 100 runs)", || {
        let rows = interval_mass_errors(seed, &[100, 1000, 10_000], 100, 10, exec)?;
        let slope = log_log_slope(&rows.iter().map(|&(m, e)| (m as f64, e)).collect::<Vec<_>>());
        let detail = rows
            .iter()
            .map(|(m, e)| format!("M={m}: MAE={e:.5}"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(((-0.7..=-0.3).contains(&slope), slope, "slope in [-0.7, -0.3]".into(), detail))
    })
}

/// Chi-squared tail against the exponential closed form and the window
/// statistic against hand-computed cases.
pub fn chi_squared_machinery() -> Result<SuiteReport> {
    timed("chi-squared machinery", || {
        let mut worst: f64 = 0.0;
        for x in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let p = chi_squared_p_value(x, 2)?;
            worst = worst.max((p - (-x / 2.0f64).exp()).abs());
        }
        let window = |counts: &[usize]| -> Result<f64> {
            let w: usize = counts.iter().sum();
            let mut win = AssessmentWindow::new(w, counts.len() - 1)?;
            let mut out = None;
            for (j, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    out = win.push_and_maybe_test(RankStatistic {
                        value: j,
                        time_index: 0,
                        dimension_index: 0,
                    })?;
                }
            }
            Ok(out.map(|r| r.chi2).unwrap_or(f64::NAN))
        };
        let cases = [
            (window(&[2; 8])?, 0.0),
            (window(&[4, 0, 2, 2, 2, 2, 2, 2])?, 4.0),
            (window(&[20, 0, 0, 0, 0, 0, 0, 0])?, 140.0),
        ];
        let exact = cases.iter().all(|(got, want)| got == want);
        Ok((
            worst <= 1e-10 && exact,
            worst,
            "|Q - exp(-x/2)| <= 1e-10 and hand cases exact".into(),
            format!("hand cases {:?}", cases.map(|c| c.0)),
        ))
    })
}

/// Filtered means of a brute-force grid filter for the scalar
/// linear-Gaussian model, on `n` points spanning `±half_width`.
pub fn grid_filter_means(cfg: &LinearGaussianConfig, obs: &[f64], n: usize, half_width: f64) -> Vec<f64> {
    let h = 2.0 * half_width / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * h).collect();
    let kernel: Vec<f64> = grid
        .iter()
        .flat_map(|&x| grid.iter().map(move |&xp| (x, xp)))
        .map(|(x, xp)| gaussian_density(x, cfg.a * xp, cfg.q))
        .collect();
    let mut belief: Vec<f64> = grid.iter().map(|&x| gaussian_density(x, cfg.m0, cfg.v0)).collect();
    let mut means = Vec::with_capacity(obs.len());
    for &y in obs {
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let row = &kernel[i * n..(i + 1) * n];
                row.iter().zip(&belief).map(|(k, b)| k * b).sum::<f64>() * h
            })
            .collect();
        for (p, &x) in next.iter_mut().zip(&grid) {
            *p *= gaussian_density(y, x, cfg.r_obs);
        }
        let z: f64 = next.iter().sum();
        for p in next.iter_mut() {
            *p /= z;
        }
        means.push(grid.iter().zip(&next).map(|(x, p)| x * p).sum());
        belief = next;
    }
    means
}

/// Kalman filtered means against the grid filter over 50 steps.
pub fn kalman_grid_agreement(seed: u64) -> Result<SuiteReport> {
    timed("Kalman vs grid filter (50 steps)", || {
        let cfg = oracle_model();
        let model = LinearGaussian::new(cfg.clone())?;
        let (_, obs) = generate_truth_and_observations(&model, 50, RngStream::new(seed).derive(0x4752_4944))?;
        let ys: Vec<f64> = obs.iter().map(|o| o[0]).collect();
        let grid = grid_filter_means(&cfg, &ys, 2048, 10.0 * cfg.stationary_state_sd());
        let mut b = KalmanBelief::prior(&cfg);
        let mut worst: f64 = 0.0;
        for (y, g) in ys.iter().zip(&grid) {
            b = kalman_update(&b, *y, &cfg);
            worst = worst.max((b.filtered_mean - g).abs());
        }
        Ok((worst <= 1e-6, worst, "max |kalman - grid| <= 1e-6".into(), "2048-point grid".into()))
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub rank_rule: RankRule,
    pub exec: Execution,
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64, options: VerifyOptions) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        rank_exactness(seed, options.rank_rule)?,
        rank_convergence(seed, options.exec)?,
        convergence_rate(seed, options.exec)?,
        chi_squared_machinery()?,
        kalman_grid_agreement(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<_> = [1.0, 10.0, 100.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-0.5))).collect();
        assert!((log_log_slope(&pts) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn tv_of_uniform_counts_is_zero() {
        assert_eq!(tv_to_uniform(&[5; 8]).0, 0.0);
        let (tv, _) = tv_to_uniform(&[8, 0, 0, 0, 0, 0, 0, 0]);
        assert!((tv - 0.875).abs() < 1e-15);
    }

    #[test]
    fn fault_injection_breaks_exactness() {
        assert!(rank_exactness(1, RankRule::StrictLess).unwrap().passed);
        assert!(!rank_exactness(1, RankRule::OffByOne).unwrap().passed);
    }

    #[test]
    fn machinery_passes() {
        assert!(chi_squared_machinery().unwrap().passed);
    }
}

//! Multi-run experiments: synthetic truth, filtering, metrics, aggregation
//! and CSV output.

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::adaptation::{run_adaptive_filter, FilterStep};
use crate::config::{ExperimentConfig, ModelSpec, SweepEntry};
use crate::error::{Result, SmcError};
use crate::exec::Execution;
use crate::model::{Observation, StateSpaceModel, StateVector};
use crate::models::{LinearGaussian, Lorenz63};
use crate::rng::RngStream;

/// One step of a run, paired with the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub time_index: usize,
    pub estimate: StateVector,
    pub truth: StateVector,
    pub m_used: usize,
    pub p_value: Option<f64>,
    pub hellinger: Option<f64>,
    pub rank_value: usize,
}

impl ExperimentRecord {
    pub fn from_step(step: FilterStep, truth: StateVector) -> Self {
        Self {
            time_index: step.time_index,
            estimate: step.estimate,
            truth,
            m_used: step.m_used,
            p_value: step.p_value,
            hellinger: step.hellinger,
            rank_value: step.rank_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub mse: f64,
    pub m_bar: f64,
    pub mean_p: f64,
    pub mean_hellinger: f64,
    /// Filter loop only; truth generation is excluded.
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub outcome: std::result::Result<RunSummary, SmcError>,
    pub records: Vec<ExperimentRecord>,
}

/// Mean and standard error of one metric over the successful runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub mse: Estimate,
    pub m_bar: Estimate,
    pub mean_p: Estimate,
    pub mean_hellinger: Estimate,
    pub wall_clock_seconds: Estimate,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub label: String,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

impl BatchResult {
    pub fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }
}

const DATA_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;
const PRIOR_STREAM: u64 = u64::MAX;
const OBS_STREAM: u64 = 1 << 62;

/// Sample one trajectory `x_1..x_T` (the initial state is not returned) and
/// its observations.
pub fn generate_truth_and_observations<M: StateSpaceModel + ?Sized>(
    model: &M,
    t_len: usize,
    rng: RngStream,
) -> Result<(Vec<StateVector>, Vec<Observation>)> {
    if t_len == 0 {
        return Err(SmcError::InvalidArgument(
            "trajectory length T must be at least 1".into(),
        ));
    }
    let mut x = model.sample_prior(&mut rng.derive(PRIOR_STREAM).rng());
    let mut truth = Vec::with_capacity(t_len);
    let mut obs = Vec::with_capacity(t_len);
    for t in 1..=t_len as u64 {
        x = model.sample_transition(&x, &mut rng.derive(t).rng());
        obs.push(model.sample_observation(&x, &mut rng.derive(OBS_STREAM + t).rng()));
        truth.push(x.clone());
    }
    Ok((truth, obs))
}

fn retained(records: &[ExperimentRecord], discard_fraction: f64) -> Result<&[ExperimentRecord]> {
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(SmcError::InvalidArgument(format!(
            "discard fraction must lie in [0, 1), got {discard_fraction}"
        )));
    }
    let skip = (records.len() as f64 * discard_fraction).floor() as usize;
    let kept = &records[skip.min(records.len())..];
    if kept.is_empty() {
        return Err(SmcError::InvalidArgument("no records retained".into()));
    }
    Ok(kept)
}

/// Mean squared Euclidean error of the full state over the retained steps.
pub fn mse(records: &[ExperimentRecord], discard_fraction: f64) -> Result<f64> {
    let kept = retained(records, discard_fraction)?;
    let total: f64 = kept
        .iter()
        .map(|r| {
            r.estimate
                .iter()
                .zip(r.truth.iter())
                .map(|(e, t)| (e - t).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / kept.len() as f64)
}

/// Mean particle count over the second half of the run. For odd `T` the
/// first record is dropped before halving.
pub fn m_bar(records: &[ExperimentRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(SmcError::InvalidArgument(
            "averaged particle count needs at least two records".into(),
        ));
    }
    let even = &records[records.len() % 2..];
    let half = &even[even.len() / 2..];
    Ok(half.iter().map(|r| r.m_used as f64).sum::<f64>() / half.len() as f64)
}

/// Mean of the window p-values and Hellinger distances whose assessment step
/// falls in the retained part of the run. NaN if there is none.
pub fn mean_window_diagnostics(records: &[ExperimentRecord], discard_fraction: f64) -> Result<(f64, f64)> {
    let kept = retained(records, discard_fraction)?;
    let (mut p, mut h, mut n) = (0.0, 0.0, 0usize);
    for r in kept {
        if let (Some(pv), Some(hv)) = (r.p_value, r.hellinger) {
            p += pv;
            h += hv;
            n += 1;
        }
    }
    if n == 0 {
        return Ok((f64::NAN, f64::NAN));
    }
    Ok((p / n as f64, h / n as f64))
}

/// Per-run data and filter streams; the data stream does not depend on the
/// filter configuration.
pub fn run_streams(root: RngStream, run: usize) -> (RngStream, RngStream) {
    (
        root.derive(DATA_STREAM).derive(run as u64),
        root.derive(FILTER_STREAM).derive(run as u64),
    )
}

fn run_one<M: StateSpaceModel>(
    model: &M,
    config: &ExperimentConfig,
    run: usize,
    root: RngStream,
    exec: Execution,
) -> RunResult {
    let (data, filter) = run_streams(root, run);
    let attempt = || -> Result<(RunSummary, Vec<ExperimentRecord>)> {
        let (truth, obs) = generate_truth_and_observations(model, config.experiment.t, data)?;
        let adaptation = config.effective_adaptation();
        let started = Instant::now();
        let steps = run_adaptive_filter(model, &adaptation, &obs, filter, exec)?;
        let wall = started.elapsed().as_secs_f64();
        let records: Vec<_> = steps
            .into_iter()
            .zip(truth)
            .map(|(s, x)| ExperimentRecord::from_step(s, x))
            .collect();
        let d = config.experiment.discard_fraction;
        let (mean_p, mean_hellinger) = mean_window_diagnostics(&records, d)?;
        let summary = RunSummary {
            run,
            seed: data.stream_id,
            mse: mse(&records, d)?,
            m_bar: if records.len() >= 2 {
                m_bar(&records)?
            } else {
                records[0].m_used as f64
            },
            mean_p,
            mean_hellinger,
            wall_clock_seconds: wall,
        };
        Ok((summary, records))
    };
    match attempt() {
        Ok((summary, records)) => RunResult {
            run,
            outcome: Ok(summary),
            records,
        },
        Err(e) => RunResult {
            run,
            outcome: Err(e),
            records: Vec::new(),
        },
    }
}

/// Reduce run results in run-index order.
pub fn aggregate(runs: &[RunResult]) -> Aggregate {
    let ok: Vec<&RunSummary> = runs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let collect = |f: fn(&RunSummary) -> f64| {
        Estimate::from_samples(&ok.iter().map(|s| f(s)).filter(|v| !v.is_nan()).collect::<Vec<_>>())
    };
    Aggregate {
        n_ok: ok.len(),
        n_failed: runs.len() - ok.len(),
        mse: collect(|s| s.mse),
        m_bar: collect(|s| s.m_bar),
        mean_p: collect(|s| s.mean_p),
        mean_hellinger: collect(|s| s.mean_hellinger),
        wall_clock_seconds: collect(|s| s.wall_clock_seconds),
    }
}

/// Run `n_runs` independent seeded runs of `config`. Failed runs are kept
/// in the result and excluded from the aggregate.
pub fn run_batch(
    label: &str,
    config: &ExperimentConfig,
    n_runs: usize,
    root: RngStream,
    exec: Execution,
) -> Result<BatchResult> {
    config.validate()?;
    if n_runs == 0 {
        return Err(SmcError::InvalidArgument("n_runs must be at least 1".into()));
    }
    let runs = match &config.model {
        ModelSpec::Lorenz(c) => {
            let model = Lorenz63::new(c.clone())?;
            exec.map_coarse(n_runs, |i| run_one(&model, config, i, root, exec))
        }
        ModelSpec::LinearGaussian(c) => {
            let model = LinearGaussian::new(c.clone())?;
            exec.map_coarse(n_runs, |i| run_one(&model, config, i, root, exec))
        }
    };
    let aggregate = aggregate(&runs);
    Ok(BatchResult {
        label: label.to_string(),
        runs,
        aggregate,
    })
}

/// Run every entry of a sweep with the same root stream, so run `i` of each
/// entry sees the same synthetic data.
pub fn run_sweep(entries: &[SweepEntry], root: RngStream, exec: Execution) -> Result<Vec<BatchResult>> {
    entries
        .iter()
        .map(|e| run_batch(&e.label, &e.config, e.config.experiment.runs, root, exec))
        .collect()
}

/// Floating-point serialisation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Per-step CSV: `t,M,p_value,hellinger,rank,estimate_1..,truth_1..`.
pub fn write_run_csv<W: std::io::Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = records.first().map(|r| r.estimate.dim()).unwrap_or(0);
    let mut header = vec![
        "t".to_string(),
        "M".into(),
        "p_value".into(),
        "hellinger".into(),
        "rank".into(),
    ];
    header.extend((1..=d).map(|i| format!("estimate_{i}")));
    header.extend((1..=d).map(|i| format!("truth_{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.time_index.to_string(),
            r.m_used.to_string(),
            format_opt(r.p_value),
            format_opt(r.hellinger),
            r.rank_value.to_string(),
        ];
        row.extend(r.estimate.iter().map(|&v| format_float(v)));
        row.extend(r.truth.iter().map(|&v| format_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate CSV: one row per run, then `mean` and `stderr` rows per label.
/// Wall-clock times are written separately by [`write_timing_csv`] so this
/// file is reproducible byte for byte.
pub fn write_aggregate_csv<W: std::io::Write>(out: W, batches: &[BatchResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "row", "status", "seed", "mse", "m_bar", "mean_p", "mean_hellinger"])?;
    for b in batches {
        for r in &b.runs {
            match &r.outcome {
                Ok(s) => w.write_record([
                    b.label.clone(),
                    r.run.to_string(),
                    "ok".into(),
                    s.seed.to_string(),
                    format_float(s.mse),
                    format_float(s.m_bar),
                    format_float(s.mean_p),
                    format_float(s.mean_hellinger),
                ])?,
                Err(e) => w.write_record([
                    b.label.clone(),
                    r.run.to_string(),
                    format!("failed: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
            }
        }
        let a = &b.aggregate;
        let status = format!("ok={} failed={}", a.n_ok, a.n_failed);
        for (row, pick) in [
            ("mean", (|e: &Estimate| e.mean) as fn(&Estimate) -> f64),
            ("stderr", |e: &Estimate| e.stderr),
        ] {
            w.write_record([
                b.label.clone(),
                row.to_string(),
                status.clone(),
                String::new(),
                format_float(pick(&a.mse)),
                format_float(pick(&a.m_bar)),
                format_float(pick(&a.mean_p)),
                format_float(pick(&a.mean_hellinger)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: std::io::Write>(out: W, batches: &[BatchResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "run", "wall_clock_seconds"])?;
    for b in batches {
        for s in b.summaries() {
            w.write_record([b.label.clone(), s.run.to_string(), format_float(s.wall_clock_seconds)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write `aggregate.csv`, `timing.csv` and, if requested, one
/// `<label>_run<NNN>.csv` per run into `dir`.
pub fn write_outputs(dir: &Path, batches: &[BatchResult], per_run: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_aggregate_csv(fs::File::create(dir.join("aggregate.csv"))?, batches)?;
    write_timing_csv(fs::File::create(dir.join("timing.csv"))?, batches)?;
    if per_run {
        for b in batches {
            for r in &b.runs {
                if r.outcome.is_ok() {
                    let path = dir.join(format!("{}_run{:03}.csv", b.label, r.run));
                    write_run_csv(fs::File::create(path)?, &r.records)?;
                }
            }
        }
    }
    Ok(())
}

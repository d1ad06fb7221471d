use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_smc::config::{parse_config, preset, ExperimentConfig, SweepEntry, PRESETS};
use adaptive_smc::harness::{run_sweep, write_outputs, BatchResult};
use adaptive_smc::verify::{self, RankRule, VerifyOptions};
use adaptive_smc::{Execution, RngStream};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptive-smc", version, about = "Adaptive bootstrap particle filter experiments")]
struct Cli {
    /// Worker threads for runs and particles.
    #[arg(long, global = true, env = "ADAPTIVE_SMC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for a number of seeded runs.
    Run(ExperimentArgs),
    /// Run a named preset sweep.
    Sweep {
        #[command(flatten)]
        common: ExperimentArgs,
        /// One of table3-desk, table3-full, m0-desk, m0-full.
        #[arg(long)]
        preset: String,
    },
    /// Run the statistical verification suites.
    Verify {
        #[arg(long, default_value_t = 20_170_401)]
        seed: u64,
        #[arg(long, hide = true)]
        break_rank_convention: bool,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Root seed; overrides experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs; overrides experiment.runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Override a configuration key, e.g. adaptation.p_high=0.7.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ExperimentArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("experiment.seed={s}"));
        }
        if let Some(r) = self.runs {
            overrides.push(format!("experiment.runs={r}"));
        }
        Ok(parse_config(&text, &overrides)?)
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("built without the `parallel` feature; --threads {n} ignored");
    Ok(())
}

fn report(batches: &[BatchResult]) {
    for b in batches {
        let a = &b.aggregate;
        eprintln!(
            "{:<20} ok {:>3} failed {:>3}  MSE {:.4} ± {:.4}  M̄ {:.1} ± {:.1}  time {:.2}s",
            b.label, a.n_ok, a.n_failed, a.mse.mean, a.mse.stderr, a.m_bar.mean, a.m_bar.stderr,
            a.wall_clock_seconds.mean
        );
    }
}

fn execute(entries: &[SweepEntry], seed: u64, out: &Path, per_run: bool) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for e in entries {
        let name = if entries.len() == 1 { "config.toml".to_string() } else { format!("{}.toml", e.label) };
        fs::write(out.join(name), e.config.to_toml())?;
    }
    let batches = run_sweep(entries, RngStream::new(seed), Execution::Parallel)?;
    write_outputs(out, &batches, per_run)?;
    report(&batches);
    let failed: usize = batches.iter().map(|b| b.aggregate.n_failed).sum();
    if failed > 0 {
        eprintln!("{failed} run(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let label = match config.filter.mode {
                adaptive_smc::config::FilterMode::Adaptive => "adaptive",
                adaptive_smc::config::FilterMode::Fixed => "fixed",
            };
            let seed = config.experiment.seed;
            let per_run = config.experiment.per_run_csv;
            let entries = [SweepEntry { label: label.into(), config }];
            execute(&entries, seed, &args.out, per_run)
        }
        Command::Sweep { common, preset: name } => {
            if !PRESETS.contains(&name.as_str()) {
                bail!("unknown preset `{name}`; available: {}", PRESETS.join(", "));
            }
            let base = common.resolve()?;
            let mut entries = preset(&name, &base)?;
            for e in &mut entries {
                if let Some(r) = common.runs {
                    e.config.experiment.runs = r;
                }
            }
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("config.toml"), base.to_toml())?;
            execute(&entries, base.experiment.seed, &common.out, base.experiment.per_run_csv)
        }
        Command::Verify { seed, break_rank_convention } => {
            let options = VerifyOptions {
                rank_rule: if break_rank_convention { RankRule::OffByOne } else { RankRule::StrictLess },
                exec: Execution::Parallel,
            };
            let reports = verify::run_all(seed, options)?;
            for r in &reports {
                println!("{r}");
            }
            // Exit status 10 + i names the first failing suite.
            Ok(match reports.iter().position(|r| !r.passed) {
                None => ExitCode::SUCCESS,
                Some(i) => ExitCode::from(10 + i as u8),
            })
        }
    }
}

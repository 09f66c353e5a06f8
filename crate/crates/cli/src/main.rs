//! Experiment harness for the vmckit library.
//!
//! Subcommands: `verify` (the field-runnable invariant suite), `vmc-run`
//! (energy minimization), `pretrain-run` (supervised fitting, scalar or
//! orbital), `compare-pretrain` (both orbital losses from identical
//! seeds), and `report` (plots and summaries from trace CSVs).
//!
//! Exit codes: 0 success, 1 check or assertion failure, 2 configuration
//! error, 3 numerical divergence.

mod config;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use vmckit::ansatz::Parameters;
use vmckit::model::ground_truth_spectrum;
use vmckit::pretrain::orbital::{compare_orbital_pretrain, median, orbital_pretrain, OrbitalLoss};
use vmckit::pretrain::{pretrain_train, PretrainConfig};
use vmckit::verify::{run_checks, Fixtures};
use vmckit::vmc::{vmc_train, RunOutput, VmcConfig};

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "vmckit", version, about = "variational Monte Carlo training toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Path to the TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the thread count (0 keeps the default pool).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the estimator/gradient/scale-invariance check suite.
    Verify {
        /// Number of random fixtures per enumeration check.
        #[arg(long, default_value_t = 50)]
        fixtures: usize,
    },
    /// Energy minimization run; writes trace.csv and prints a summary.
    VmcRun(RunArgs),
    /// Supervised pre-training run (scalar target or orbital toy).
    PretrainRun(RunArgs),
    /// Orbital toy with both losses from identical seeds.
    ComparePretrain(RunArgs),
    /// Plots and a text report from one or more trace CSVs.
    Report {
        /// Output directory for report.txt and the SVG files.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Slope-fit burn-in step.
        #[arg(long, default_value_t = 200)]
        burn_in: usize,
        /// Trace CSV paths.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG_ERROR)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify { fixtures } => cmd_verify(fixtures),
        Command::VmcRun(args) => cmd_vmc_run(&args),
        Command::PretrainRun(args) => cmd_pretrain_run(&args),
        Command::ComparePretrain(args) => cmd_compare_pretrain(&args),
        Command::Report {
            out,
            burn_in,
            traces,
        } => cmd_report(&out, burn_in, &traces),
    }
}

fn cmd_verify(fixture_count: usize) -> Result<ExitCode> {
    let fixtures = Fixtures {
        fixture_count,
        ..Default::default()
    };
    let results = run_checks(&fixtures);
    let mut failed = 0;
    for r in &results {
        println!(
            "[{}] {:<55} measured {:>12.3e}  tolerance {:>9.1e}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.error,
            r.tol,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "{} checks, {} failed ({} fixtures per enumeration check)",
        results.len(),
        failed,
        fixture_count
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILURE)
    })
}

fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.experiment.threads = threads;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.experiment.output));
    if cfg.experiment.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.threads)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok((cfg, out))
}

fn finish_run(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    output: &RunOutput,
    summary: String,
) -> Result<ExitCode> {
    std::fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    output.trace.write_file(&trace_path)?;
    // The effective configuration (after CLI overrides) rides along with
    // the trace so a run can be reproduced from its output directory.
    std::fs::write(out_dir.join("effective-config.toml"), cfg.to_toml()?)?;
    println!("{summary}");
    println!("trace written to {}", trace_path.display());
    if let Some(reason) = &output.divergence {
        eprintln!("run diverged: {reason}");
        return Ok(ExitCode::from(EXIT_DIVERGENCE));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_vmc_run(args: &RunArgs) -> Result<ExitCode> {
    let (cfg, out_dir) = load_config(args)?;
    let finite = cfg.system.kind == "finite";
    let ansatz = cfg.build_ansatz()?;
    let n = cfg.experiment.batch_size;
    let (hamiltonian, reference_energy) = if finite {
        let h = cfg.finite_hamiltonian()?;
        let (e0, _) = ground_truth_spectrum(h.as_matrix().expect("matrix"))?;
        (h, Some(e0))
    } else {
        let h = vmckit::model::Hamiltonian::schrodinger(cfg.potential()?);
        // The Coulomb system has a known ground energy in these units.
        let e0 = match cfg.system.kind.as_str() {
            "hatom" => Some(-0.5),
            "ho1d" => Some(0.5),
            _ => None,
        };
        (h, e0)
    };

    let run_cfg = VmcConfig {
        hamiltonian,
        n,
        steps: cfg.experiment.steps,
        schedule: cfg.schedule(n)?,
        seed: cfg.experiment.seed,
        sampler: cfg.sampler_kind(finite)?,
        record_exact: finite,
    };
    let theta0 = initial_parameters(&cfg, ansatz.as_ref())?;
    let output = vmc_train(ansatz.as_ref(), theta0, &run_cfg)?;

    let mut summary = format!(
        "vmc run: system={} ansatz={} steps={} n={} seed={}",
        cfg.system.kind,
        ansatz.kind(),
        cfg.experiment.steps,
        n,
        cfg.experiment.seed
    );
    // Diagnostic rows from an aborted run carry no energy value.
    let energies: Vec<f64> = output
        .trace
        .rows
        .iter()
        .filter_map(|r| r.energy_est)
        .collect();
    let tail = &energies[energies.len().saturating_sub(200)..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    summary += &format!("\n  energy estimate (tail mean): {tail_mean:.6}");
    if let Some(last) = output.trace.rows.last() {
        if let Some(exact) = last.energy_exact {
            summary += &format!("\n  final exact energy: {exact:.10}");
        }
    }
    if let Some(e0) = reference_energy {
        summary += &format!(
            "\n  reference ground energy: {e0:.10}  gap: {:.3e}",
            (tail_mean - e0).abs()
        );
    }
    let grad: Vec<f64> = output
        .trace
        .rows
        .iter()
        .map(|r| r.grad_norm)
        .filter(|g| g.is_finite())
        .collect();
    let rm = vmckit::diagnostics::running_min(&grad);
    if let Ok(fit) = vmckit::diagnostics::loglog_slope(&rm, 200.min(grad.len() / 4)) {
        summary += &format!("\n  running-min slope: {:.3}", fit.slope);
    }
    finish_run(&out_dir, &cfg, &output, summary)
}

fn initial_parameters(
    cfg: &ExperimentConfig,
    ansatz: &dyn vmckit::ansatz::Ansatz,
) -> Result<Parameters> {
    match ansatz.kind() {
        "table" => {
            // Mildly sloped start, bounded away from zero amplitudes.
            let size = ansatz.param_dim();
            let values: Vec<f64> = (0..size)
                .map(|i| 1.0 - 0.6 * i as f64 / size as f64)
                .collect();
            Ok(Parameters::from_slice(&values)?)
        }
        "exp-family" => Ok(Parameters::from_slice(&vec![0.3; ansatz.param_dim()])?),
        "mlp" => {
            let mlp_seed = cfg.experiment.seed;
            let mlp = vmckit::ansatz::MlpAnsatz::new(
                cfg.continuous_space()?,
                cfg.ansatz.hidden.clone(),
            )?;
            Ok(mlp.init_parameters(mlp_seed))
        }
        other => anyhow::bail!("no initialization rule for ansatz {other:?}"),
    }
}

fn cmd_pretrain_run(args: &RunArgs) -> Result<ExitCode> {
    let (cfg, out_dir) = load_config(args)?;
    if cfg.system.kind == "pretrain_toy" {
        let orbital_cfg = cfg.orbital_config()?;
        let run = orbital_pretrain(&orbital_cfg)?;
        let summary = format!(
            "orbital pretraining: loss={} orbitals={} steps={} n={} seed={}\n  final sin angle: {:.4}",
            match orbital_cfg.loss {
                OrbitalLoss::ScaleInvariant => "si",
                OrbitalLoss::Mse => "mse",
            },
            orbital_cfg.orbitals,
            orbital_cfg.steps,
            orbital_cfg.n,
            orbital_cfg.seed,
            run.final_angle
        );
        return finish_run(&out_dir, &cfg, &run.output, summary);
    }

    let target = cfg.build_target()?;
    let ansatz = cfg.build_ansatz()?;
    let finite = cfg.system.kind == "finite";
    let run_cfg = PretrainConfig {
        target,
        n: cfg.experiment.batch_size,
        steps: cfg.experiment.steps,
        schedule: cfg.schedule(cfg.experiment.batch_size)?,
        seed: cfg.experiment.seed,
        strategy: cfg.norm_strategy()?,
        mcmc: cfg.mcmc_options(),
        record_exact: finite,
    };
    let theta0 = pretrain_initial(&cfg, ansatz.as_ref(), &run_cfg)?;
    let output = pretrain_train(ansatz.as_ref(), theta0, &run_cfg)?;
    let mut summary = format!(
        "pretraining: system={} ansatz={} strategy={} steps={} n={} seed={}",
        cfg.system.kind,
        ansatz.kind(),
        run_cfg.strategy.describe(),
        run_cfg.steps,
        run_cfg.n,
        run_cfg.seed
    );
    if let Some(last) = output.trace.rows.last() {
        if let Some(si) = last.si_loss {
            summary += &format!("\n  final scale-invariant loss: {si:.4e}");
        }
        if let Some(angle) = last.angle {
            summary += &format!("\n  final sin angle: {angle:.4}");
        }
    }
    finish_run(&out_dir, &cfg, &output, summary)
}

fn pretrain_initial(
    cfg: &ExperimentConfig,
    ansatz: &dyn vmckit::ansatz::Ansatz,
    run_cfg: &PretrainConfig,
) -> Result<Parameters> {
    match ansatz.kind() {
        "table" => {
            // Random start with positive overlap against the target: the
            // signed objective keeps the sign of the overlap.
            use rand::Rng as _;
            let mut rng = vmckit::sampler::stream_rng(cfg.experiment.seed, 0xF2);
            let size = ansatz.param_dim();
            let mut values: Vec<f64> = (0..size).map(|_| rng.random_range(0.3..1.0)).collect();
            let phi = run_cfg.target.phi_full()?;
            let overlap: f64 = values.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
            if overlap < 0.0 {
                for v in &mut values {
                    *v = -*v;
                }
            }
            Ok(Parameters::from_slice(&values)?)
        }
        _ => initial_parameters(cfg, ansatz),
    }
}

fn cmd_compare_pretrain(args: &RunArgs) -> Result<ExitCode> {
    let (cfg, out_dir) = load_config(args)?;
    let orbital_cfg = cfg.orbital_config()?;
    let rows = compare_orbital_pretrain(&orbital_cfg, &cfg.pretrain.seeds)?;
    std::fs::create_dir_all(&out_dir)?;
    let mut si: Vec<f64> = rows.iter().map(|r| r.si_angle).collect();
    let mut mse: Vec<f64> = rows.iter().map(|r| r.mse_angle).collect();
    println!(
        "orbital loss comparison: orbitals={} steps={} n={} rho={}",
        orbital_cfg.orbitals, orbital_cfg.steps, orbital_cfg.n, cfg.pretrain.rho
    );
    for r in &rows {
        println!(
            "  seed {}: scale-invariant {:.4}  squared-error {:.4}",
            r.seed, r.si_angle, r.mse_angle
        );
    }
    let si_median = median(&mut si);
    let mse_median = median(&mut mse);
    println!("  median: scale-invariant {si_median:.4}  squared-error {mse_median:.4}");

    // Per-loss traces for the first seed, for the report command.
    for loss in [OrbitalLoss::ScaleInvariant, OrbitalLoss::Mse] {
        let mut one = orbital_cfg.clone();
        one.seed = *cfg.pretrain.seeds.first().unwrap_or(&0);
        one.loss = loss;
        let run = orbital_pretrain(&one)?;
        let name = match loss {
            OrbitalLoss::ScaleInvariant => "trace_si.csv",
            OrbitalLoss::Mse => "trace_mse.csv",
        };
        run.output.trace.write_file(&out_dir.join(name))?;
    }
    println!("traces written to {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(out: &Path, burn_in: usize, traces: &[PathBuf]) -> Result<ExitCode> {
    let mut loaded: Vec<report::LoadedTrace> = traces
        .iter()
        .map(|p| report::load_trace(p))
        .collect::<Result<_>>()?;
    // File stems repeat easily (every run writes trace.csv); number them.
    let mut seen = std::collections::HashMap::new();
    for item in &mut loaded {
        let count = seen.entry(item.name.clone()).or_insert(0usize);
        *count += 1;
        if *count > 1 {
            item.name = format!("{}-{}", item.name, count);
        }
    }
    let text = report::build_report(&loaded, out, burn_in)?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

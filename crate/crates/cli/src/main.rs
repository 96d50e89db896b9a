//! Command-line front end: parses a run config, executes or validates the
//! configured study, and exports sweep tables, fidelity reports, and noise
//! trajectories.
//!
//! Exit codes: 0 success, 2 rejected configuration (the message names the
//! failing field), 3 infeasible pulse design (the message reports the
//! maximal reachable phase), 1 numerical or I/O failure at runtime.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dephasim_core::config::{RunConfig, ScenarioKind};
use dephasim_core::evolution::realization_seed;
use dephasim_core::noise::{NoiseModel, NoiseRealization};
use dephasim_core::scenarios::{self, SweepRow};
use dephasim_core::SimError;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dephasim",
    version,
    about = "Simulation toolkit for dephasing-protected quantum gate studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured study and write its tables and reports.
    Run(CommonArgs),
    /// Check the config, noise model, and schedule designs without running.
    Validate(CommonArgs),
    /// Sample noise trajectories and write them with an ensemble summary.
    NoiseSample {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of realization files (defaults to execution.realizations).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Print the toolkit version.
    Version,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run config (TOML). May also be given positionally.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(value_name = "CONFIG", conflicts_with = "config", hide = true)]
    config_pos: Option<PathBuf>,
    /// Directory receiving tables, reports, and trajectory files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the config's execution.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread count for sampling (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl CommonArgs {
    fn load_config(&self) -> Result<RunConfig, SimError> {
        let path = self.config.as_ref().or(self.config_pos.as_ref()).ok_or_else(|| {
            SimError::invalid("config", "no config path given (use --config <path>)")
        })?;
        let text = fs::read_to_string(path).map_err(|e| {
            SimError::invalid("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut config = RunConfig::from_toml(&text)?;
        if let Some(seed) = self.seed {
            config.execution.seed = seed;
        }
        Ok(config)
    }

    fn init_workers(&self) {
        if let Some(n) = self.workers {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: anyhow::Result<()> = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => {
            return match cmd_validate(args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("invalid configuration: {e}");
                    // Keep the failure class visible: 2 for rejected inputs,
                    // 3 for infeasible pulse designs.
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
        Command::NoiseSample { common, count } => cmd_noise_sample(common, *count),
        Command::Version => {
            println!("dephasim {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<SimError>().map(|e| e.exit_code() as u8).unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn table_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::StorageSequences => "storage_sequences.csv",
        ScenarioKind::GateProtection => "gate_protection.csv",
        ScenarioKind::TrappedIon => "trapped_ion.csv",
    }
}

fn kind_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::StorageSequences => "storage-sequences",
        ScenarioKind::GateProtection => "gate-protection",
        ScenarioKind::TrappedIon => "trapped-ion",
    }
}

fn summary_line(row: &SweepRow) -> String {
    let mut line = format!(
        "{} {} {}={}: F={:.6}",
        row.sequence, row.method, row.sweep_param, row.value, row.fidelity
    );
    if row.std_err.is_finite() {
        let _ = write!(line, " ± {:.6}", row.std_err);
    }
    let _ = write!(line, " (error {:.6}, duration {:.4})", row.error, row.duration);
    line
}

fn cmd_run(args: &CommonArgs) -> anyhow::Result<()> {
    let config = args.load_config()?;
    args.init_workers();
    let output = scenarios::run_scenario(&config)?;
    for row in &output.rows {
        println!("{}", summary_line(row));
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let table_path = args.out.join(table_name(config.scenario.kind));
    fs::write(&table_path, scenarios::csv_document(&output.rows))
        .with_context(|| format!("cannot write {}", table_path.display()))?;
    println!("wrote {}", table_path.display());
    if !output.reports.is_empty() {
        let json = serde_json::to_string_pretty(&output.reports)?;
        let report_path = args.out.join("trapped_ion_reports.json");
        fs::write(&report_path, json)
            .with_context(|| format!("cannot write {}", report_path.display()))?;
        println!("wrote {}", report_path.display());
    }
    Ok(())
}

fn cmd_validate(args: &CommonArgs) -> Result<(), SimError> {
    let config = args.load_config()?;
    let plan = scenarios::plan_scenario(&config)?;
    println!(
        "config valid: {} sweeping {} over {:?}",
        kind_name(config.scenario.kind),
        plan.sweep_param,
        plan.values
    );
    for (label, duration) in &plan.sequences {
        println!("  {label}: duration {duration:.4}");
    }
    Ok(())
}

fn cmd_noise_sample(common: &CommonArgs, count: Option<usize>) -> anyhow::Result<()> {
    use rayon::prelude::*;

    let config = common.load_config()?;
    common.init_workers();
    let model = scenarios::base_noise_model(&config)?;
    let count = count.unwrap_or(config.execution.realizations);
    if count == 0 {
        return Err(SimError::invalid("count", "must be at least 1").into());
    }
    let duration = config.execution.sample_duration_tc * model.t_c;
    let points = config.execution.sample_points;
    let grid: Vec<f64> =
        (0..points).map(|i| duration * i as f64 / (points - 1) as f64).collect();
    let realizations: Vec<NoiseRealization> = (0..count)
        .into_par_iter()
        .map(|r| model.sample_realization(&grid, realization_seed(config.execution.seed, r)))
        .collect::<Result<_, _>>()?;
    let summary = ensemble_summary(&model, &realizations);

    fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create output directory {}", common.out.display()))?;
    for (r, realization) in realizations.iter().enumerate() {
        let path = common.out.join(format!("noise_{r:04}.csv"));
        fs::write(&path, realization.to_csv())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let summary_path = common.out.join("noise_summary.csv");
    fs::write(&summary_path, &summary)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    println!(
        "wrote {count} trajectory files and {} to {}",
        summary_path.display(),
        common.out.display()
    );
    for line in summary.lines().filter(|l| l.starts_with("variance")) {
        println!("{line}");
    }
    Ok(())
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ensemble statistics against their stationary expectations: per-qubit
/// means, variances, and lag covariances (lags 0, t_c/2, t_c, 2·t_c where
/// the grid allows). One estimate per realization (time-averaged), with the
/// scatter across realizations as the standard error.
fn ensemble_summary(model: &NoiseModel, realizations: &[NoiseRealization]) -> String {
    let n = realizations[0].n_qubits();
    let grid = &realizations[0].grid;
    let len = grid.len();
    let dt = grid[1] - grid[0];
    let mut lag_steps: Vec<usize> = [0.0, model.t_c / 2.0, model.t_c, 2.0 * model.t_c]
        .iter()
        .map(|tau| (tau / dt).round() as usize)
        .filter(|m| *m < len / 2)
        .collect();
    lag_steps.dedup();

    let mut out = String::from("statistic,qubit_j,qubit_k,lag,measured,expected,std_err\n");
    for j in 0..n {
        let per: Vec<f64> = realizations
            .iter()
            .map(|r| (0..len).map(|i| r.value(j, i)).sum::<f64>() / len as f64)
            .collect();
        let (mean, se) = mean_se(&per);
        let _ = writeln!(out, "mean,{},{},0,{mean},0,{se}", j + 1, j + 1);
    }
    for j in 0..n {
        for k in j..n {
            for &m in &lag_steps {
                let per: Vec<f64> = realizations
                    .iter()
                    .map(|r| {
                        let pairs = len - m;
                        (0..pairs).map(|i| r.value(j, i) * r.value(k, i + m)).sum::<f64>()
                            / pairs as f64
                    })
                    .collect();
                let (mean, se) = mean_se(&per);
                let tau = m as f64 * dt;
                let expected = model.correlation(j, k, tau).unwrap_or(f64::NAN);
                let stat = if j == k && m == 0 { "variance" } else { "covariance" };
                let _ = writeln!(out, "{stat},{},{},{tau},{mean},{expected},{se}", j + 1, k + 1);
            }
        }
    }
    out
}

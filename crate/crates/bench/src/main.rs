use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emorf_bench::config::{parse_filters, CliConfigFile, Figure};
use emorf_bench::harness::{data_hash, run_on_record, run_sweep};
use emorf_bench::output::{sweep_summary, write_boxplot_tsv, write_results_csv};
use emorf_bench::RunResult;
use emorf_core::simulator::simulate;
use serde_json::json;

#[derive(Parser)]
#[command(name = "emorf", version, about = "Outlier-robust filtering benchmarks on a TDOA tracking scenario")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration file.
    PrintDefaults,
    /// Simulate one scenario and write the ground-truth record.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter one simulated trajectory and print the result as JSON.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo sweep; writes results.csv, summary.json and box-plot data.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// fig1 (λ sweep), fig2 (m sweep), fig3 (m sweep timing) or custom.
        #[arg(long, default_value = "custom")]
        figure: String,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Leave the wall-time column out of results.csv.
        #[arg(long)]
        no_timing: bool,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario seed (simulate, run) or master seed (sweep).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated filter names.
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<String>>,
}

enum Failure {
    /// Bad configuration, usage or filter name.
    Config(String),
    /// Runs failed or output could not be written.
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

fn config_err(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: impl ToString) -> Failure {
    Failure::Run(e.to_string())
}

fn load_config(common: &CommonArgs) -> Result<CliConfigFile, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            CliConfigFile::from_toml(&text).map_err(config_err)?
        }
        None => CliConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(filters) = &common.filters {
        cfg.run.filters = filters.clone();
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(common: &CommonArgs, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let scenario = cfg.scenario().map_err(config_err)?;
    let record = simulate(&scenario).map_err(run_err)?;
    fs::create_dir_all(out).map_err(run_err)?;
    let path = out.join("ground_truth.txt");
    write_file(&path, record.to_text().as_bytes())?;
    eprintln!("wrote {} steps to {}", record.horizon(), path.display());
    let report = json!({
        "path": path.display().to_string(),
        "rows": record.horizon(),
        "seed": scenario.rng_seed,
        "data_hash": data_hash(&record),
    });
    println!("{report}");
    Ok(())
}

fn result_json(r: &RunResult) -> serde_json::Value {
    json!({
        "filter": r.filter.name(),
        "rmse": if r.succeeded() { json!(r.rmse) } else { json!(null) },
        "em_iterations_total": r.em_iterations_total,
        "nonconverged_steps": r.nonconverged_steps,
        "wall_time_s": r.wall_time,
        "error": r.error,
    })
}

fn cmd_run(common: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let scenario = cfg.scenario().map_err(config_err)?;
    let filter_cfg = cfg.filter_config().map_err(config_err)?;
    let filters = parse_filters(&cfg.run.filters).map_err(config_err)?;
    let record = simulate(&scenario).map_err(run_err)?;
    let hash = data_hash(&record);
    let results: Vec<RunResult> = filters
        .iter()
        .map(|&f| run_on_record(&scenario, &record, &hash, f, &filter_cfg, scenario.lambda, 0))
        .collect();
    let report = json!({
        "seed": scenario.rng_seed,
        "data_hash": hash,
        "lambda": scenario.lambda,
        "num_sensors": scenario.num_sensors,
        "results": results.iter().map(result_json).collect::<Vec<_>>(),
    });
    println!("{report}");
    match results.iter().filter(|r| !r.succeeded()).count() {
        0 => Ok(()),
        n => Err(Failure::Run(format!("{n} filter run(s) failed"))),
    }
}

fn cmd_sweep(common: &CommonArgs, out: &Path, figure: &str, jobs: Option<usize>, no_timing: bool) -> Result<(), Failure> {
    let figure: Figure = figure.parse().map_err(config_err)?;
    let mut cfg = load_config(common)?;
    if let Some(jobs) = jobs {
        cfg.run.jobs = jobs;
    }
    let spec = cfg.sweep_spec(figure).map_err(config_err)?;
    eprintln!(
        "{figure}: {} values × {} filters × {} runs on {} worker(s)",
        spec.values.len(),
        spec.filters.len(),
        spec.mc_runs,
        if spec.jobs == 0 { rayon::current_num_threads() } else { spec.jobs }
    );
    let result = run_sweep(&spec).map_err(run_err)?;
    fs::create_dir_all(out).map_err(run_err)?;

    let include_timing = cfg.sweep.include_timing && !no_timing;
    let mut csv_bytes = Vec::new();
    write_results_csv(&mut csv_bytes, spec.variable, &result.rows, include_timing).map_err(run_err)?;
    let csv_path = out.join("results.csv");
    write_file(&csv_path, &csv_bytes)?;

    let summary = sweep_summary(figure.name(), spec.variable, spec.master_seed, spec.mc_runs, &result);
    let summary_path = out.join("summary.json");
    let summary_text = serde_json::to_string_pretty(&summary).map_err(run_err)?;
    write_file(&summary_path, summary_text.as_bytes())?;

    let metric: fn(&RunResult) -> f64 = if figure == Figure::Fig3 {
        RunResult::wall_time_per_step
    } else {
        |r| r.rmse
    };
    let mut tsv = Vec::new();
    write_boxplot_tsv(&mut tsv, spec.variable, &result.rows, metric).map_err(run_err)?;
    let tsv_path = out.join(format!("{}_boxplot.tsv", figure.name()));
    write_file(&tsv_path, &tsv)?;

    let files: Vec<String> = [csv_path, summary_path, tsv_path].iter().map(|p| p.display().to_string()).collect();
    let report = json!({
        "figure": figure.name(),
        "expected_rows": result.expected_rows,
        "rows_succeeded": result.succeeded_rows(),
        "rows_failed": result.failed_rows(),
        "files": files,
    });
    println!("{report}");
    match result.failed_rows() {
        0 => Ok(()),
        n => Err(Failure::Run(format!("{n} of {} runs failed", result.expected_rows))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::PrintDefaults => {
            print!("{}", CliConfigFile::default().to_toml());
            Ok(())
        }
        Command::Simulate { common, out } => cmd_simulate(common, out),
        Command::Run { common } => cmd_run(common),
        Command::Sweep { common, out, figure, jobs, no_timing } => cmd_sweep(common, out, figure, *jobs, *no_timing),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) | Failure::Run(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

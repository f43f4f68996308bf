use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpkmeans::pipeline::{run, PipelineConfig};
use dpkmeans_cli::{
    budget_report, gen_hard_instance, gen_synthetic, ingest_csv, run_experiment, write_csv,
    BudgetSpec, DataSpec, ExperimentSpec,
};

#[derive(Parser)]
#[command(
    name = "dpkmeans",
    about = "Differentially private k-means clustering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV dataset under a differential-privacy budget.
    Cluster(ClusterArgs),
    /// Generate a Gaussian-mixture dataset as CSV.
    GenSynth(GenSynthArgs),
    /// Generate a zero-optimal-cost hard instance as CSV.
    GenHard(GenHardArgs),
    /// Benchmark the private pipeline against non-private baselines.
    Experiment(ExperimentArgs),
    /// Split a total privacy budget into per-stage parameters.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct ClusterArgs {
    /// Input CSV of real-valued rows, no header.
    #[arg(long)]
    input: PathBuf,
    /// Declared diameter bound of the data (validated).
    #[arg(long)]
    diameter: f64,
    /// Number of centers.
    #[arg(long)]
    k: usize,
    /// Total privacy budget epsilon.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Total privacy budget delta; defaults to n^(-1.5).
    #[arg(long)]
    delta: Option<f64>,
    /// Approximation constant (grid growth, projection distortion).
    #[arg(long, default_value_t = 0.5)]
    eps_approx: f64,
    /// Reduced dimension override.
    #[arg(long)]
    dprime: Option<usize>,
    /// Selection rounds per grid level override.
    #[arg(long)]
    kprime: Option<usize>,
    /// Private refinement rounds after the main release.
    #[arg(long, default_value_t = 0)]
    dp_lloyd_rounds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the first input line.
    #[arg(long, default_value_t = false)]
    skip_header: bool,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    components: usize,
    /// Per-coordinate Gaussian spread around each component mean.
    #[arg(long, default_value_t = 0.025)]
    spread: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenHardArgs {
    /// Number of codewords.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Copies of each codeword.
    #[arg(long, default_value_t = 5)]
    multiplicity: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Synth,
    File,
    Hard,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Dataset source.
    #[arg(long, value_enum, default_value_t = SourceKind::Synth)]
    source: SourceKind,
    /// Input CSV (source = file).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Declared diameter bound (source = file).
    #[arg(long)]
    diameter: Option<f64>,
    #[arg(long, default_value_t = false)]
    skip_header: bool,
    /// Synthetic size (source = synth).
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    components: usize,
    #[arg(long, default_value_t = 0.025)]
    spread: f64,
    /// Codewords of the hard instance (source = hard).
    #[arg(long, default_value_t = 2)]
    codewords: usize,
    #[arg(long, default_value_t = 16)]
    hard_dim: usize,
    #[arg(long, default_value_t = 5)]
    multiplicity: usize,
    /// Comma-separated list of center counts to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Defaults to n^(-1.5).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eps_approx: f64,
    #[arg(long)]
    dprime: Option<usize>,
    #[arg(long)]
    kprime: Option<usize>,
    #[arg(long, default_value_t = 1)]
    dp_lloyd_rounds: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output stem for <stem>.runs.jsonl, <stem>.runs.csv,
    /// <stem>.summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    dp_lloyd_rounds: usize,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Cluster(args) => {
            let data = ingest_csv(&args.input, args.diameter, args.skip_header)?;
            let delta = args
                .delta
                .unwrap_or_else(|| (data.n() as f64).powf(-1.5));
            let privacy = dpkmeans::pipeline::split_budget(args.eps, delta)?;
            let config = PipelineConfig {
                k: args.k,
                eps_approx: args.eps_approx,
                privacy,
                dprime: args.dprime,
                kprime: args.kprime,
                dp_lloyd_rounds: args.dp_lloyd_rounds,
                seed: args.seed,
            };
            let result = run(&data, &config)?;
            let json = serde_json::to_string_pretty(&result)?;
            match &args.out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            eprintln!(
                "clustered n={} d={} k={}: cost {:.6e}, (eps, delta) = ({:.6}, {:.3e})",
                data.n(),
                data.dim(),
                args.k,
                result.cost,
                result.privacy.eps_total,
                result.privacy.delta_total
            );
            Ok(())
        }
        Command::GenSynth(args) => {
            let data = gen_synthetic(args.n, args.d, args.components, args.spread, args.seed)?;
            write_csv(&args.out, &data)?;
            eprintln!(
                "wrote {} points in R^{} to {} (diameter bound {})",
                data.n(),
                data.dim(),
                args.out.display(),
                data.diameter_bound()
            );
            Ok(())
        }
        Command::GenHard(args) => {
            let data = gen_hard_instance(args.k, args.d, args.multiplicity, args.seed)?;
            write_csv(&args.out, &data)?;
            eprintln!(
                "wrote {} points ({} codewords x {}) to {} (diameter bound {})",
                data.n(),
                args.k,
                args.multiplicity,
                args.out.display(),
                data.diameter_bound()
            );
            Ok(())
        }
        Command::Experiment(args) => {
            let data = match args.source {
                SourceKind::File => {
                    let path = args
                        .input
                        .ok_or("--input is required with --source file")?;
                    let diameter = args
                        .diameter
                        .ok_or("--diameter is required with --source file")?;
                    DataSpec::File {
                        path,
                        diameter,
                        skip_header: args.skip_header,
                    }
                }
                SourceKind::Synth => DataSpec::Synthetic {
                    n: args.n,
                    d: args.d,
                    components: args.components,
                    spread: args.spread,
                },
                SourceKind::Hard => DataSpec::HardInstance {
                    codewords: args.codewords,
                    d: args.hard_dim,
                    multiplicity: args.multiplicity,
                },
            };
            let spec = ExperimentSpec {
                data,
                k_values: args.k,
                budget: BudgetSpec::Split {
                    eps_total: args.eps,
                    delta_total: args.delta,
                },
                eps_approx: args.eps_approx,
                dprime: args.dprime,
                kprime: args.kprime,
                dp_lloyd_rounds: args.dp_lloyd_rounds,
                reps: args.reps,
                seed: args.seed,
                out: args.out,
            };
            let output = run_experiment(&spec)?;
            eprintln!(
                "wrote {} records to {} / {} and {} summary rows to {}",
                output.records.len(),
                output.runs_jsonl.display(),
                output.runs_csv.display(),
                output.summaries.len(),
                output.summary_csv.display()
            );
            for row in &output.summaries {
                eprintln!(
                    "  {:<8} k={:<3} mean cost {:.6e} (std {:.3e})",
                    row.algorithm, row.k, row.mean_cost, row.std_cost
                );
            }
            Ok(())
        }
        Command::Budget(args) => {
            let (params, report, round_trip_ok) =
                budget_report(args.eps, args.delta, args.dp_lloyd_rounds)?;
            println!("eps_E   = {}", params.eps_e);
            println!("delta_E = {}", params.delta_e);
            println!("eps_L   = {}", params.eps_l);
            println!("eps_G   = {}", params.eps_g);
            println!("delta_G = {}", params.delta_g);
            for stage in &report.stages {
                println!(
                    "stage '{}': eps = {}, delta = {}",
                    stage.stage, stage.eps, stage.delta
                );
            }
            println!(
                "total: (eps, delta) = ({}, {})",
                report.eps_total, report.delta_total
            );
            println!(
                "round-trip check: {}",
                if round_trip_ok { "OK" } else { "MISMATCH" }
            );
            Ok(())
        }
    }
}

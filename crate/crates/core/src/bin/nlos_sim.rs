use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlos_imaging::config::{resolve, Mode, RunConfig};
use nlos_imaging::pipeline;

#[derive(Parser)]
#[command(
    name = "nlos-sim",
    about = "NLOS imaging simulator: codebook design, space-time plane configuration, echo synthesis and back-projection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write image, metrics and manifest artifacts.
    Run(RunArgs),
    /// Resolve the design and emit design_report.json without simulating.
    DesignOnly(DesignArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (key = value lines or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the acquisition mode (multiview, multiview-static, mirror).
    #[arg(long)]
    mode: Option<Mode>,
    /// Override the number of sweeps.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Cap the worker thread count (results are identical for any value).
    #[arg(long)]
    threads: Option<usize>,
    /// Treat design warnings as errors.
    #[arg(long)]
    strict: bool,
    /// Comma-separated artifact list: csv,pgm,json,plan,cube.
    #[arg(long, value_delimiter = ',')]
    emit: Option<Vec<String>>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    config: PathBuf,
    /// Optional output directory; the report also prints to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> nlos_imaging::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            if let Some(threads) = args.threads {
                // Ignore failures from re-initialising in tests.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            let mut cfg = RunConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(mode) = args.mode {
                cfg.mode = mode;
            }
            if let Some(sweeps) = args.sweeps {
                cfg.sweeps = Some(sweeps);
            }
            if let Some(emit) = args.emit {
                cfg.emit = emit;
            }
            let resolved = resolve(&cfg)?;
            let output = pipeline::run_to_dir(&resolved, &args.out)?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(snr) = output.snr_db {
                eprintln!("peak echo SNR: {snr:.1} dB");
            }
            eprintln!(
                "peak {:.4e} at ({:.3}, {:.3}) m; -3 dB widths {:.4} x {:.4} m; artifacts in {}",
                output.metrics.peak_magnitude,
                output.metrics.peak_position.0,
                output.metrics.peak_position.1,
                output.metrics.width_x,
                output.metrics.width_y,
                args.out.display()
            );
            if args.strict && !output.warnings.is_empty() {
                eprintln!("strict mode: failing on warnings");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::DesignOnly(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let resolved = resolve(&cfg)?;
            let report = pipeline::design_only(&resolved, args.out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if args.strict && !report.warnings.is_empty() {
                eprintln!("strict mode: failing on warnings");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

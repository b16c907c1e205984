use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nfisac_core::harness::{
    format_report, load_config, run_suite, run_sweep, threads_from_env, write_csv, DerivativeSource,
    LibraryDerivatives, Method, RunOptions, SweepConfig,
};
use nfisac_core::{AntennaLayout, CVector, Error, TargetState};

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "nfisac", version, about = "Near-field ISAC bounds and beamformer sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isotropic CRBs and SPEB (numeric and closed form) for every point.
    Crb(RunArgs),
    /// Beamformer design for every point (config methods other than isotropic).
    Optimize(RunArgs),
    /// Every configured method over the sweep.
    Sweep(RunArgs),
    /// Run the built-in invariant suite.
    Validate {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Substitute a known-bad derivative to exercise the suite.
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; defaults to the config `output` field, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Append a wall_time_ms column (not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    /// Flip the sign of the range derivative.
    RangeSign,
}

struct FlippedRange;

impl DerivativeSource for FlippedRange {
    fn derivatives(
        &self,
        layout: &AntennaLayout,
        target: &TargetState,
        wavelength: f64,
    ) -> nfisac_core::Result<Vec<CVector>> {
        let mut d = LibraryDerivatives.derivatives(layout, target, wavelength)?;
        d[0] = -&d[0];
        Ok(d)
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("nfisac: {msg}");
    ExitCode::from(code)
}

fn run(args: RunArgs, adjust: impl FnOnce(&mut SweepConfig)) -> ExitCode {
    let Format::Csv = args.format;
    let mut cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    adjust(&mut cfg);
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let rows = match run_sweep(&cfg, &RunOptions { seed: args.seed, threads }) {
        Ok(r) => r,
        Err(e @ Error::Infeasible(_)) => return fail(EXIT_INFEASIBLE, e),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let written = match args.out.or(cfg.output.clone()) {
        Some(path) => File::create(&path)
            .map_err(Error::from)
            .and_then(|f| write_csv(&rows, BufWriter::new(f), args.timing)),
        None => write_csv(&rows, io::stdout().lock(), args.timing),
    };
    if let Err(e) = written {
        return fail(EXIT_CONFIG, e);
    }
    let infeasible = rows.iter().filter(|r| r.status.starts_with("infeasible")).count();
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    if failed > 0 {
        eprintln!("nfisac: {failed} of {} rows failed; see the status column", rows.len());
    }
    if infeasible > 0 {
        eprintln!("nfisac: {infeasible} of {} rows infeasible", rows.len());
        return ExitCode::from(EXIT_INFEASIBLE);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Crb(args) => run(args, |c| c.methods = vec![Method::Isotropic]),
        Command::Optimize(args) => run(args, |c| {
            c.methods.retain(|m| *m != Method::Isotropic);
            if c.methods.is_empty() {
                c.methods.push(Method::Vqf);
            }
        }),
        Command::Sweep(args) => run(args, |_| {}),
        Command::Validate { filter, inject_fault } => {
            let source: &dyn DerivativeSource = match inject_fault {
                Some(Fault::RangeSign) => &FlippedRange,
                None => &LibraryDerivatives,
            };
            let outcomes = run_suite(filter.as_deref(), source);
            let report = format_report(&outcomes);
            let _ = io::stdout().lock().write_all(report.as_bytes());
            if outcomes.is_empty() {
                return fail(EXIT_VALIDATION, "no checks matched the filter");
            }
            if outcomes.iter().all(|o| o.verdict.passed) {
                ExitCode::SUCCESS
            } else {
                let names: Vec<_> = outcomes.iter().filter(|o| !o.verdict.passed).map(|o| o.name).collect();
                fail(EXIT_VALIDATION, format!("failed: {}", names.join(", ")))
            }
        }
    }
}

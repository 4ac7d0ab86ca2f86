use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use willmore_cli::{exit, parse_point, parse_suite, run_command, run_suite, CliError, Command, MetricSpec, Mode, Overrides, RunOptions};

/// Evaluate conformal hypersurface invariants of a metric jet.
#[derive(Parser)]
#[command(name = "willmore", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// Metric specification (JSON). Omit when using --suite.
    #[arg(required_unless_present = "suite", conflicts_with = "suite")]
    spec: Option<PathBuf>,
    /// Run every instance of a suite file in parallel.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Override the jet order N.
    #[arg(long)]
    order: Option<usize>,
    /// Override the arithmetic mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Override the base point, e.g. `0,1,0,0`.
    #[arg(long)]
    base_point: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall time in reports (makes them non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn run(args: &Args) -> Result<(String, i32), CliError> {
    let overrides = Overrides {
        order: args.order,
        mode: args.mode,
        base_point: args.base_point.as_deref().map(parse_point).transpose()?,
    };
    let opts = RunOptions { timing: args.timing };
    if let Some(path) = &args.suite {
        let suite = parse_suite(&read(path)?)?;
        let report = run_suite(args.command, &suite, &overrides, opts);
        let code = if report.any_error() {
            exit::ENGINE_ERROR
        } else if report.passed() {
            exit::PASSED
        } else {
            exit::CHECKS_FAILED
        };
        return Ok((report.to_json(), code));
    }
    let path = args.spec.as_ref().expect("clap requires a spec or a suite");
    let spec = overrides.apply(MetricSpec::parse(&read(path)?)?)?;
    let report = run_command(args.command, &spec, opts)?;
    let code = if report.passed() { exit::PASSED } else { exit::CHECKS_FAILED };
    Ok((report.to_json(), code))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (text, code) = match run(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match &args.out {
        Some(p) => {
            if let Err(source) = std::fs::write(p, &text) {
                eprintln!("error: {}", CliError::Io { path: p.display().to_string(), source });
                return ExitCode::from(exit::INVALID_INPUT as u8);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code as u8)
}

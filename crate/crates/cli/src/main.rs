mod exec;
mod schema;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use filterlab_core::measure::DEFAULT_ENUM_CAP;

/// Exit: 0 success, 2 validation failure, 3 finished but not certified,
/// 4 internal error.
#[derive(Parser)]
#[command(name = "filterlab", version, about = "Finite-stage filter experiments")]
struct Cli {
    /// Command to run; must match the spec file's command.
    command: String,
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Enumeration cap: exact sums may expand at most 2^cap cylinders.
    #[arg(long)]
    cap: Option<usize>,
    /// Override the spec's Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 2;
const EXIT_UNCERTIFIED: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!("filterlab: {message}");
    ExitCode::from(code)
}

fn emit(cli: &Cli, report: &serde_json::Value) -> Option<ExitCode> {
    let rendered = match cli.format {
        Format::Json => {
            let mut s = match serde_json::to_string(report) {
                Ok(s) => s,
                Err(e) => return Some(fail(EXIT_INTERNAL, &format!("serialization: {e}"))),
            };
            s.push('\n');
            s
        }
        Format::Text => exec::render_text(report),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, rendered) {
                return Some(fail(
                    EXIT_INTERNAL,
                    &format!("cannot write {}: {e}", path.display()),
                ));
            }
        }
        None => print!("{rendered}"),
    }
    None
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let bytes = match fs::read(&cli.spec) {
        Ok(b) => b,
        Err(e) => {
            return fail(
                EXIT_INVALID,
                &format!("cannot read {}: {e}", cli.spec.display()),
            )
        }
    };
    let mut command = match schema::parse_spec(&bytes) {
        Ok(c) => c,
        Err(msg) => return fail(EXIT_INVALID, &msg),
    };
    if cli.command != command.name() {
        return fail(
            EXIT_INVALID,
            &format!(
                "command line says {:?} but the spec says {:?}",
                cli.command,
                command.name()
            ),
        );
    }
    if let Some(seed) = cli.seed {
        if !command.reseed(seed) {
            return fail(
                EXIT_INVALID,
                "--seed applies only to specs with a monte_carlo strategy",
            );
        }
    }
    let cap = cli.cap.unwrap_or(DEFAULT_ENUM_CAP);

    match exec::execute(&command, cap) {
        Ok(outcome) => {
            let report = exec::report(&command, &outcome);
            if let Some(code) = emit(&cli, &report) {
                return code;
            }
            if outcome.certified {
                ExitCode::from(EXIT_OK)
            } else {
                ExitCode::from(EXIT_UNCERTIFIED)
            }
        }
        Err(err) => {
            // The inputs parsed but the mathematics rejected them; report the
            // reason in-band so the failure is still byte-deterministic.
            let outcome = exec::Outcome {
                results: serde_json::json!({}),
                certified: false,
                diagnostics: vec![err.to_string()],
            };
            let report = exec::report(&command, &outcome);
            if let Some(code) = emit(&cli, &report) {
                return code;
            }
            ExitCode::from(EXIT_INVALID)
        }
    }
}

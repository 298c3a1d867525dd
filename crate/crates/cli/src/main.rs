//! `bimpc`: run sessions, audit privacy, and self-test the protocol.
//!
//! Every flag can also be set through an environment variable named
//! `BIMPC_<FLAG>`, e.g. `BIMPC_SEED`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bimpc::audit::{
    render_report, standard_audit, AuditConfig, EnumerationOptions, DEFAULT_COST_CAP,
};
use bimpc::field::smallest_prime_above;
use bimpc::harness::DumpMode;
use bimpc::protocol::{run_session, SessionConfig};
use bimpc::selftest::{run_selftest, Sabotage};
use bimpc::{BitVector, Error, Modulus};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;
const EXIT_COST: u8 = 5;

#[derive(Parser)]
#[command(
    name = "bimpc",
    version,
    about = "Two-client private binary dot product simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session on two input files and print y.
    Run(RunArgs),
    /// Exhaustively check view distributions at a tiny configuration.
    Audit(AuditArgs),
    /// Compare the implementation against reference oracles.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// File holding W1's bit vector (0/1 characters, whitespace ignored).
    #[arg(long, env = "BIMPC_INPUT_A")]
    input_a: PathBuf,
    /// File holding W2's bit vector.
    #[arg(long, env = "BIMPC_INPUT_B")]
    input_b: PathBuf,
    /// Field prime; defaults to the smallest prime above 2n.
    #[arg(long, env = "BIMPC_PRIME")]
    prime: Option<u64>,
    /// Padding length n'; defaults to n.
    #[arg(long, env = "BIMPC_PAD")]
    pad: Option<usize>,
    /// Harness seed; drawn from the OS and printed to stderr if omitted.
    #[arg(long, env = "BIMPC_SEED")]
    seed: Option<u64>,
    /// Write the transcript dump here.
    #[arg(long, env = "BIMPC_TRANSCRIPT")]
    transcript: Option<PathBuf>,
    /// Hide n and n' in the transcript header.
    #[arg(long, env = "BIMPC_REDACT")]
    redact: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 1, env = "BIMPC_N")]
    n: usize,
    #[arg(long, default_value_t = 1, env = "BIMPC_PAD")]
    pad: usize,
    /// Field prime; defaults to the smallest prime above 2n.
    #[arg(long, env = "BIMPC_PRIME")]
    prime: Option<u64>,
    /// Largest number of sessions one enumeration may run (accepts 1e8).
    #[arg(long, default_value_t = DEFAULT_COST_CAP, value_parser = parse_count, env = "BIMPC_CAP")]
    cap: u64,
    /// Report destination.
    #[arg(long, env = "BIMPC_OUT")]
    out: PathBuf,
    /// Worker threads for enumeration.
    #[arg(long, env = "BIMPC_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0, env = "BIMPC_SEED")]
    seed: u64,
    /// Run against a deliberately broken subject (doma or triot).
    #[arg(long, hide = true, env = "BIMPC_SABOTAGE")]
    sabotage: Option<Sabotage>,
}

/// Parses a count written as an integer or in `1e8` notation.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("{s:?} is not a whole non-negative count"));
    }
    Ok(v as u64)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Input(_) | Error::Wire(_) => EXIT_PARSE,
        Error::Config(_) => EXIT_CONFIG,
        Error::CostExceeded { .. } => EXIT_COST,
        _ => EXIT_PROTOCOL,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err))
}

fn read_input(path: &Path) -> Result<BitVector, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    text.parse()
        .map_err(|e: Error| Error::Input(format!("{}: {e}", path.display())))
}

fn modulus_for(prime: Option<u64>, n: usize) -> Result<Modulus, Error> {
    Modulus::new(match prime {
        Some(q) => q,
        None => smallest_prime_above(2 * n as u64)?,
    })
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let inputs = read_input(&args.input_a).and_then(|a| Ok((a, read_input(&args.input_b)?)));
    let (a, b) = match inputs {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if a.len() != b.len() {
        return fail(&Error::Input(format!(
            "inputs have different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let seed = args.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    });
    let n = a.len();
    let config = modulus_for(args.prime, n)
        .and_then(|q| SessionConfig::seeded(n, args.pad.unwrap_or(n), q, seed));
    let config = match config {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let (y, transcript) = match run_session(&a, &b, &config) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if let Some(path) = &args.transcript {
        let mode = if args.redact {
            DumpMode::Redacted
        } else {
            DumpMode::Debug
        };
        if let Err(e) = fs::write(path, transcript.dump(mode)) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_PROTOCOL);
        }
    }
    println!("{y}");
    ExitCode::SUCCESS
}

fn cmd_audit(args: AuditArgs) -> ExitCode {
    let modulus = match modulus_for(args.prime, args.n) {
        Ok(q) => q,
        Err(e) => return fail(&e),
    };
    let config = AuditConfig::new(args.n, args.pad, modulus);
    let options = EnumerationOptions {
        cap: args.cap,
        jobs: args.jobs,
    };
    let verdicts = match standard_audit(&config, &options) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let report = render_report(&verdicts);
    if let Err(e) = fs::write(&args.out, &report) {
        eprintln!("error: cannot write {}: {e}", args.out.display());
        return ExitCode::from(EXIT_PROTOCOL);
    }
    for v in &verdicts {
        println!("{} {}", if v.passed { "PASS" } else { "FAIL" }, v.check);
    }
    if verdicts.iter().all(|v| v.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn cmd_selftest(args: SelftestArgs) -> ExitCode {
    let report = match run_selftest(args.sabotage, args.seed) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    println!("{report}");
    match report.first_counterexample() {
        None => ExitCode::SUCCESS,
        Some((suite, example)) => {
            eprintln!("counterexample in {suite}: {example}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Selftest(args) => cmd_selftest(args),
    }
}

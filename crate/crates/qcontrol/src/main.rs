//! `qcontrol` binary: one verb per verification suite, plus static
//! checking and evaluation of routed circuit files.
//!
//! Exit code 0 exactly when the run produced no failing case; 1 for a
//! failing suite or a circuit whose route check found violations; 2 for
//! configuration and I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcontrol::cli::{
    parse_bind, run_routed_check, run_routed_eval, run_suite, SuiteConfig, SuiteName, SuiteReport,
};
use qcontrol::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qcontrol",
    version,
    about = "Verification suites for controlled quantum channels built from sector-preserving circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Comma-separated target dimensions, overriding the suite default.
    #[arg(long, global = true, value_name = "D1,D2,...")]
    dims: Option<String>,

    /// Trials per case, overriding the suite default.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// PRNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Pass bound for distance cases.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Write the JSON report (or the evaluated channel) to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Circuit-built control of random pinned channels against the direct
    /// controlled construction.
    #[command(name = "ctrl-equiv")]
    CtrlEquiv,
    /// Control of embedded unitaries: controlled-unitary agreement and a
    /// rank-one Choi matrix.
    #[command(name = "ctrl-unitary")]
    CtrlUnitary,
    /// Control build and inversion round trips, both directions.
    #[command(name = "roundtrip")]
    Roundtrip,
    /// Pin laws: canonicalization, pin-determines-control, coherence-block
    /// readback, extract-and-rebuild.
    #[command(name = "lemma2")]
    PinLaws,
    /// Two-channel control equality holds exactly for equal Kraus pairings;
    /// perturbed pairings separate proportionally.
    #[command(name = "thm2-twocontrol")]
    PrefixEquality,
    /// Two-slot control of embedded isometries against the direct
    /// controlled pair.
    #[command(name = "two-ctrl-isometry")]
    IsometryPair,
    /// Coherence-rank obstruction for plain inputs and its
    /// environment-assisted escape.
    #[command(name = "depol-obstruction")]
    CoherenceObstruction,
    /// Composite multi-branch control: circuit agreement and parameter
    /// extraction round trips.
    #[command(name = "composite")]
    Composite,
    /// Sampling verifier over the routed supermap constructions, including
    /// the deliberately broken variant.
    #[command(name = "verify-supermap")]
    VerifySupermap,
    /// Statically check a routed circuit file: named routes, composed
    /// end-to-end route, and slot obligations.
    #[command(name = "routed-check")]
    RoutedCheck { file: PathBuf },
    /// Evaluate a routed circuit file against slot bindings given as
    /// routed-channel JSON files.
    #[command(name = "routed-eval")]
    RoutedEval {
        file: PathBuf,
        /// Slot binding, repeatable once per slot.
        #[arg(long = "bind", value_name = "SLOT=FILE")]
        bind: Vec<String>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let suite = match &cli.command {
        Command::CtrlEquiv => SuiteName::CtrlEquiv,
        Command::CtrlUnitary => SuiteName::CtrlUnitary,
        Command::Roundtrip => SuiteName::Roundtrip,
        Command::PinLaws => SuiteName::PinLaws,
        Command::PrefixEquality => SuiteName::PrefixEquality,
        Command::IsometryPair => SuiteName::IsometryPair,
        Command::CoherenceObstruction => SuiteName::CoherenceObstruction,
        Command::Composite => SuiteName::Composite,
        Command::VerifySupermap => SuiteName::VerifySupermap,
        Command::RoutedCheck { file } => {
            let report = run_routed_check(file)?;
            let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            text.push('\n');
            print!("{text}");
            if let Some(path) = &cli.json {
                std::fs::write(path, &text)?;
            }
            return Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::RoutedEval { file, bind } => {
            let binds = bind.iter().map(|b| parse_bind(b)).collect::<Result<Vec<_>>>()?;
            let channel = run_routed_eval(file, &binds)?;
            let mut text = serde_json::to_string_pretty(&channel).map_err(Error::from)?;
            text.push('\n');
            print!("{text}");
            if let Some(path) = &cli.json {
                std::fs::write(path, &text)?;
            }
            return Ok(ExitCode::SUCCESS);
        }
    };

    let mut config = SuiteConfig::new(suite);
    if let Some(dims) = &cli.dims {
        config.dims = parse_dims(dims)?;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(tol) = cli.tol {
        config.tolerance = tol;
    }
    config.output = cli.json.clone();

    let report = run_suite(&config)?;
    print_report(&report);
    Ok(if report.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad dimension `{part}` in --dims")))
        })
        .collect()
}

fn print_report(report: &SuiteReport) {
    for case in &report.cases {
        let tag = if case.pass { "pass" } else { "FAIL" };
        match &case.witness {
            Some(w) => println!("{tag}  {}  [{}]", case.name, w),
            None => println!("{tag}  {}  (worst {:.3e})", case.name, case.distance),
        }
    }
    println!(
        "{}: {}/{} cases passed, worst distance {:.3e}, {} ms",
        report.config.suite,
        report.passes,
        report.cases.len(),
        report.max_choi_distance,
        report.runtime_ms
    );
}

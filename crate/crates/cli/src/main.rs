use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use vesselkit::{Complex64, Execution};
use vesselkit_cli::commands::{self, read_vessel, Request};
use vesselkit_cli::error::CliError;
use vesselkit_cli::report::Report;
use vesselkit_cli::schema::to_json;
use vesselkit_cli::settings::{resolve, Overrides, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "vesselkit", version, about = "Conservative vessels: verification, synthesis, realization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Pass/fail tolerance for residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Grid steps per unit of t₂ when a document leaves n_steps open.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Number of seeded spectral probes.
    #[arg(long, global = true)]
    probes: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Spectral parameter "re,im"; repeatable.
    #[arg(long = "lambda", global = true, value_parser = parse_complex, allow_hyphen_values = true)]
    lambdas: Vec<Complex64>,
    /// Grid node index.
    #[arg(long, global = true)]
    node: Option<usize>,
    /// Write the result document here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    timing: bool,
    /// Run sweeps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// JSON file with tol, steps_per_unit, probes, seed.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Residuals of every vessel condition plus probe diagnostics.
    Verify { vessel: PathBuf },
    /// Vessel from spectral data.
    Synthesize { data: PathBuf },
    /// Vessel and transfer function from null-pole data.
    Realize { triple: PathBuf },
    /// Split off the elementary factor of a simple eigenvalue.
    Factor {
        vessel: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Input, state and output along t₂ for u = e^{λt₁}u(t₂).
    Simulate {
        vessel: PathBuf,
        /// Component "re,im" of u at the first node; repeatable.
        #[arg(long = "u0", value_parser = parse_complex, allow_hyphen_values = true)]
        u0: Vec<Complex64>,
    },
    /// Transfer function values.
    Transfer { vessel: PathBuf },
    /// Fundamental matrix of the input (or output) ODE.
    Fundamental {
        vessel: PathBuf,
        #[arg(long)]
        output_side: bool,
    },
    /// Multiplicative integral of a kernel family.
    Multint { input: PathBuf },
    /// Coupling of two vessels, first one on the input side.
    Couple { first: PathBuf, second: PathBuf },
    /// Unitary map between two vessels, if any.
    Gauge { first: PathBuf, second: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Synthesize { .. } => "synthesize",
            Command::Realize { .. } => "realize",
            Command::Factor { .. } => "factor",
            Command::Simulate { .. } => "simulate",
            Command::Transfer { .. } => "transfer",
            Command::Fundamental { .. } => "fundamental",
            Command::Multint { .. } => "multint",
            Command::Couple { .. } => "couple",
            Command::Gauge { .. } => "gauge",
        }
    }
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected \"re,im\", got {s:?}")),
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

enum Emitted {
    Report(Report),
    Vessel(String, Report),
}

fn run(cli: &Cli, arguments: &[String]) -> Result<Emitted, (CliError, Report)> {
    let name = cli.command.name();
    let flags = Overrides {
        tol: cli.common.tol,
        steps_per_unit: cli.common.steps,
        probes: cli.common.probes,
        seed: cli.common.seed,
    };
    let config = resolve(cli.common.config.as_deref(), &flags).map_err(|e| (e, Report::new(name, arguments, None)))?;
    let mut report = Report::new(name, arguments, Some(&config));
    let exec = if cli.common.sequential { Execution::Sequential } else { Execution::default() };
    let req = Request { config: &config, lambdas: &cli.common.lambdas, node: cli.common.node, exec };
    let vessel = |p: &Path| read_vessel(p);
    let outcome: Result<Option<String>, CliError> = (|| {
        match &cli.command {
            Command::Verify { vessel: p } => commands::verify(&req, &vessel(p)?, &mut report)?,
            Command::Synthesize { data } => {
                let doc = commands::synthesize(&req, data, &mut report)?;
                return Ok(Some(to_json(&doc)?));
            }
            Command::Realize { triple } => commands::realize(&req, triple, &mut report)?,
            Command::Factor { vessel: p, z } => commands::factor(&req, &vessel(p)?, *z, &mut report)?,
            Command::Simulate { vessel: p, u0 } => commands::simulate_cmd(&req, &vessel(p)?, u0, &mut report)?,
            Command::Transfer { vessel: p } => commands::transfer(&req, &vessel(p)?, &mut report)?,
            Command::Fundamental { vessel: p, output_side } => {
                commands::fundamental(&req, &vessel(p)?, *output_side, &mut report)?
            }
            Command::Multint { input } => commands::multint(&req, input, &mut report)?,
            Command::Couple { first, second } => {
                let doc = commands::couple_cmd(&req, &vessel(first)?, &vessel(second)?, &mut report)?;
                return Ok(Some(to_json(&doc)?));
            }
            Command::Gauge { first, second } => commands::gauge(&req, &vessel(first)?, &vessel(second)?, &mut report)?,
        }
        Ok(None)
    })();
    match outcome {
        Ok(Some(doc)) => Ok(Emitted::Vessel(doc, report)),
        Ok(None) => {
            report.passed = report.failed_residuals().is_empty();
            Ok(Emitted::Report(report))
        }
        Err(e) => Err((e, report)),
    }
}

fn write(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let err = CliError::Input(e.kind().to_string());
            let report = Report::new("", &arguments, None).with_error(&err);
            print!("{}", to_json(&report).unwrap_or_default());
            return ExitCode::from(1);
        }
    };
    let started = Instant::now();
    let outcome = run(&cli, &arguments);
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    eprintln!("{}: {:.1} ms", cli.command.name(), elapsed_ms);
    let (text, code, output) = match outcome {
        Ok(Emitted::Vessel(doc, report)) => {
            for r in &report.residuals {
                eprintln!("{:<16} {:>12.3e} {}", r.name, r.value.unwrap_or(f64::NAN), mark(r.passed));
            }
            (doc, 0, cli.common.output.as_deref())
        }
        Ok(Emitted::Report(mut report)) => {
            for r in &report.residuals {
                eprintln!("{:<28} {:>12.3e} {}", r.name, r.value.unwrap_or(f64::NAN), mark(r.passed));
            }
            if cli.common.timing {
                report.timing_ms = Some(elapsed_ms);
            }
            let code = report.exit_code();
            (to_json(&report).unwrap_or_default(), code, cli.common.output.as_deref())
        }
        Err((err, report)) => {
            eprintln!("{err}");
            let report = report.with_error(&err);
            // Errors always go to stdout so a vessel file is never half-written.
            (to_json(&report).unwrap_or_default(), err.exit_code(), None)
        }
    };
    if let Err(e) = write(&text, output) {
        eprintln!("{e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}

fn mark(passed: Option<bool>) -> &'static str {
    match passed {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "",
    }
}

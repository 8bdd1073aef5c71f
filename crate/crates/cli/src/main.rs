//! `modeq`: batch verification of modular Schwarzian constructions.
//!
//! Every subcommand prints JSON. Exit status is 0 when every report passes,
//! 1 when a check fails or no solution is found, 2 on bad configuration.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use modeq_core::constructions::{enumerate_ab, enumerate_report, verify_class, verify_level2, Level2Variant, RunSettings};
use modeq_core::eval::special_value_report;
use modeq_core::scalar::{parse_rational, parse_tolerance, MIN_PRECISION};
use modeq_core::solver::solve;
use modeq_core::{AlgebraicSystem, Error, EvalConfig, VerificationReport};

#[derive(Parser, Debug)]
#[command(name = "modeq", version, about = "Verify solutions of modular Schwarzian equations")]
struct Cli {
    /// Working precision in bits (at least 128).
    #[arg(long, global = true, default_value_t = 256)]
    prec_bits: u32,
    /// q-order through which series identities are checked.
    #[arg(long, global = true, default_value_t = 60)]
    order: u32,
    /// Tolerance for checks on floating-point coefficients.
    #[arg(long, global = true, default_value = "1e-20")]
    tol: String,
    /// Seed for the multistart solver.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON output (the only format).
    #[arg(long, global = true, default_value_t = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derivative ratios of η, E4, E6 and J at i and ρ.
    SpecialValues,
    /// Solve the system E^n_{a,b,c}.
    Solve {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(allow_hyphen_values = true)]
        c: String,
        n: usize,
        /// Random starts for systems that are not positive.
        #[arg(long, default_value_t = 32)]
        tries: usize,
    },
    /// Full pipeline for a residue class mod 12.
    Verify {
        #[arg(long = "class")]
        alpha: u32,
        #[arg(long)]
        n: usize,
    },
    /// Full pipeline for a level-2 construction.
    Level2 {
        #[arg(long)]
        n: usize,
        /// case1, case2-cusp0 or case2-cusp1.
        #[arg(long)]
        variant: String,
        #[arg(long, default_value_t = 32)]
        tries: usize,
    },
    /// Admissible (a, b) pairs for Γ(m).
    Enumerate {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
    },
}

enum Failure {
    Config(String),
    Check(Value),
}

fn config_error(e: Error) -> Failure {
    match e {
        Error::InvalidArgument(_) => Failure::Config(e.to_string()),
        other => Failure::Check(json!({ "error": other.to_string() })),
    }
}

fn bundle(command: &str, reports: &[VerificationReport]) -> (Value, bool) {
    let pass = reports.iter().all(|r| r.pass);
    let failing: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    let v = json!({
        "command": command,
        "pass": pass,
        "failing": failing,
        "reports": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
    });
    (v, pass)
}

fn run(cli: &Cli) -> Result<(Value, bool), Failure> {
    if cli.prec_bits < MIN_PRECISION {
        return Err(Failure::Config(format!("--prec-bits must be at least {}", MIN_PRECISION)));
    }
    let tol = parse_tolerance(&cli.tol, cli.prec_bits).ok_or_else(|| Failure::Config(format!("bad tolerance {:?}", cli.tol)))?;
    let settings = |tries| RunSettings { prec: cli.prec_bits, order: cli.order, tol: tol.clone(), seed: cli.seed, tries };
    match &cli.command {
        Command::SpecialValues => {
            let cfg = EvalConfig::new(cli.prec_bits, cli.order);
            let rep = special_value_report(&cfg, &tol).map_err(config_error)?;
            Ok(bundle("special-values", &[rep]))
        }
        Command::Solve { a, b, c, n, tries } => {
            let parse = |s: &String| parse_rational(s).ok_or_else(|| Failure::Config(format!("not a rational number: {:?}", s)));
            let sys = AlgebraicSystem::new(parse(a)?, parse(b)?, parse(c)?, *n).map_err(config_error)?;
            match solve(&sys, *tries, cli.seed, cli.prec_bits) {
                Ok(sols) => {
                    let v = json!({
                        "command": "solve",
                        "system": sys.to_string(),
                        "solutions": sols.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
                    });
                    Ok((v, true))
                }
                Err(e) => Err(Failure::Check(json!({ "command": "solve", "system": sys.to_string(), "error": e.to_string() }))),
            }
        }
        Command::Verify { alpha, n } => {
            let reps = verify_class(*alpha, *n, &settings(32)).map_err(config_error)?;
            Ok(bundle("verify", &reps))
        }
        Command::Level2 { n, variant, tries } => {
            let v = Level2Variant::parse(variant).ok_or_else(|| Failure::Config(format!("unknown variant {:?}", variant)))?;
            let reps = verify_level2(*n, v, &settings(*tries)).map_err(config_error)?;
            Ok(bundle("level2", &reps))
        }
        Command::Enumerate { m, n } => {
            let data = enumerate_ab(*m, *n).map_err(config_error)?;
            let rep = enumerate_report(&data);
            let mut v = serde_json::to_value(&data).expect("serializable");
            v["pass"] = json!(rep.pass);
            v["checks"] = json!({
                "riemann_hurwitz": rep.details["riemann_hurwitz"],
                "degree_matches": rep.details["degree_matches"],
                "matches_generic_enumeration": rep.details["matches_generic_enumeration"],
            });
            Ok((v, rep.pass))
        }
    }
}

fn emit(cli: &Cli, v: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    match &cli.out {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (v, code) = match run(&cli) {
        Ok((v, pass)) => (v, if pass { 0 } else { 1 }),
        Err(Failure::Check(v)) => (v, 1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {}", msg);
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&cli, &v) {
        eprintln!("error: {}", e);
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

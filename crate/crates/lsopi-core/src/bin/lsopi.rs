//! Command-line front end: load a system description, run the decision
//! engine or one of the cross-validation oracles, and emit reports.
//!
//! Exit codes: 0 — a verdict/answer was produced; 2 — file parse or
//! validation failure; 3 — genericity failure (sampled ranks kept
//! disagreeing); 1 — internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsopi_core::error::Error;
use lsopi_core::funlinalg::Sampler;
use lsopi_core::geometry::{ad, lie_bracket, ControlAffineSystem, VectorField};
use lsopi_core::lsopi::run_lsopi;
use lsopi_core::oracle::brute_force_lsop;
use lsopi_core::report::{report_to_json, report_to_text};
use lsopi_core::sysfile::load_system;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_SAMPLES: usize = 5;

#[derive(Parser)]
#[command(
    name = "lsopi",
    about = "Decide linearizability of two-input control-affine systems via \
             successive one-fold prolongations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SamplerArgs {
    /// Seed for the rank-confirmation sampler (overrides LSOPI_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sample points per rank confirmation.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

impl SamplerArgs {
    fn build(&self) -> Sampler {
        let seed = self
            .seed
            .or_else(|| {
                std::env::var("LSOPI_SEED")
                    .ok()
                    .and_then(|s| s.parse().ok())
            })
            .unwrap_or(DEFAULT_SEED);
        Sampler::new(seed, self.samples.max(1))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full decision procedure on a system file.
    Check {
        file: PathBuf,
        /// Emit the canonical machine-readable JSON report.
        #[arg(long, conflicts_with = "trace")]
        json: bool,
        /// Emit the full human-readable step trace.
        #[arg(long)]
        trace: bool,
        /// Prolongation-step budget (default: state dimension).
        #[arg(long)]
        max_steps: Option<usize>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Brute-force search for a linearizing prolongation sequence.
    Oracle {
        file: PathBuf,
        /// Maximum number of prolongations to try (at most 4).
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Print the Lie bracket of two named system fields (debug helper).
    Bracket {
        file: PathBuf,
        /// Two field names: f, g1, g2, or adQgI (e.g. ad2g1).
        #[arg(long, num_args = 2, value_names = ["V", "W"])]
        with: Vec<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
}

fn named_field(sys: &ControlAffineSystem, token: &str) -> Result<VectorField, Error> {
    match token {
        "f" => return Ok(sys.f().clone()),
        "g1" => return Ok(sys.g1().clone()),
        "g2" => return Ok(sys.g2().clone()),
        _ => {}
    }
    if let Some(rest) = token.strip_prefix("ad") {
        if let Some(q) = rest.strip_suffix("g1") {
            if let Ok(q) = q.parse::<usize>() {
                return Ok(ad(sys.f(), sys.g1(), q));
            }
        }
        if let Some(q) = rest.strip_suffix("g2") {
            if let Ok(q) = q.parse::<usize>() {
                return Ok(ad(sys.f(), sys.g2(), q));
            }
        }
    }
    Err(Error::Validation(format!(
        "unknown field `{}` (expected f, g1, g2, or adQg1/adQg2)",
        token
    )))
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Parse { .. }
        | Error::UnknownVariable { .. }
        | Error::ZeroDenominator
        | Error::ExponentRange(_)
        | Error::Dimension(_)
        | Error::Validation(_) => ExitCode::from(2),
        Error::NonGenericPoint { .. } | Error::Genericity(_) => ExitCode::from(3),
        Error::InclusionViolation(_) | Error::Internal(_) => ExitCode::from(1),
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Check {
            file,
            json,
            trace,
            max_steps,
            sampler,
        } => {
            let smp = sampler.build();
            let sys = load_system(&file, &smp)?;
            let rep = run_lsopi(&sys, max_steps, &smp)?;
            if json {
                print!("{}", report_to_json(&rep, &smp));
            } else if trace {
                print!("{}", report_to_text(&rep, &smp));
            } else {
                match rep.ell() {
                    Some(ell) => println!("{}: {} (ell = {})", rep.system_name, rep.verdict.as_str(), ell),
                    None => {
                        println!("{}: {}", rep.system_name, rep.verdict.as_str());
                        if let Some(reason) = rep.verdict.reason() {
                            println!("reason: {}", reason);
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Oracle { file, depth, sampler } => {
            let smp = sampler.build();
            let sys = load_system(&file, &smp)?;
            match brute_force_lsop(&sys, depth, &[], &smp)? {
                Some(w) => {
                    let seq: Vec<String> = w
                        .steps
                        .iter()
                        .map(|s| format!("u{}", s.control))
                        .collect();
                    println!(
                        "witness of length {}: prolong [{}]; final dimension {} fills at level {}",
                        w.steps.len(),
                        seq.join(", "),
                        w.system.dim(),
                        w.rho
                    );
                }
                None => println!("no witness within depth {}", depth),
            }
            Ok(())
        }
        Command::Bracket { file, with, sampler } => {
            let smp = sampler.build();
            let sys = load_system(&file, &smp)?;
            let v = named_field(&sys, &with[0])?;
            let w = named_field(&sys, &with[1])?;
            let br = lie_bracket(&v, &w);
            println!("[{}, {}] = ({})", with[0], with[1], br.display_components().join(", "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code_for(&e)
        }
    }
}

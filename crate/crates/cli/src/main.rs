use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod decompose;
mod ops;
mod util;
mod verify;

use util::{Failure, Outcome};

const AFTER_HELP: &str = "\
Exit codes:
  0  the checked property holds (or the command succeeded)
  1  the property fails; the witness names the broken condition and its residual
  2  malformed input, unreadable file or bad usage

Tolerances:
  Every threshold derives from --tol (default 1e-9, overridable by QCOMB_TOL).
  Positivity, linear membership and trace conditions accept deviations up to
  tol * max(1, |X|_F). Eigenvalues below tol * max(1, |X|) are treated as zero
  when computing supports and ranks. Decomposition residuals are accepted up to
  tol * max(1, |X|_F).

Diagnostics go to stderr. With --json, stdout carries one JSON document per
invocation.";

#[derive(Parser)]
#[command(name = "qcomb", version, about = "Verify and decompose generalized channels, combs and testers", after_help = AFTER_HELP)]
struct Cli {
    /// Numerical tolerance.
    #[arg(long, global = true, env = "QCOMB_TOL", default_value_t = qcomb::DEFAULT_TOL, value_parser = parse_tol)]
    tol: f64,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err("tolerance must be a positive finite number".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Cp,
    Channel,
    Gchannel,
    Gpovm,
    Instrument,
    Ppovm,
    Supermap,
    Comb,
    Tester,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Subspace,
    Chain,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecomposeMethod {
    SimpleFactor,
    Semilocalize,
    Ladder,
    Realize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    State,
    Channel,
    Gchannel,
    SectionElement,
    SimpleElement,
    Comb,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that a file holds an object of the given kind.
    Verify {
        #[arg(long, value_enum)]
        kind: Kind,
        /// A JSON file, or a directory whose JSON files are checked in parallel.
        #[arg(long)]
        input: PathBuf,
        /// Section of the input algebra (gchannel, gpovm, instrument, ppovm).
        #[arg(long)]
        section: Option<PathBuf>,
        /// Supermap, comb or tester spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Subspace)]
        method: Method,
        /// Outcome factor label of an instrument (default: first classical output factor).
        #[arg(long)]
        outcome: Option<u32>,
    },
    /// Split an operator into components and record the reconstruction residual.
    Decompose {
        #[arg(long, value_enum)]
        method: DecomposeMethod,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        section: Option<PathBuf>,
        /// Labels of the A group (semilocalize).
        #[arg(long, value_delimiter = ',')]
        a: Vec<u32>,
        /// Labels of the B group (semilocalize).
        #[arg(long, value_delimiter = ',')]
        b: Vec<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Link product of two operators; shared labels are contracted.
    Link {
        a: PathBuf,
        b: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Apply a supermap to a member of the level below.
    Apply {
        supermap: PathBuf,
        member: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Exit 0 iff two objects are equivalent.
    Equiv {
        x1: PathBuf,
        x2: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        section: Option<PathBuf>,
    },
    /// Write a random object.
    Sample {
        #[arg(long, value_enum)]
        kind: SampleKind,
        #[arg(long)]
        seed: u64,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Blocks of a state's algebra.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        blocks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        input_blocks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        output_blocks: Vec<usize>,
        /// Kraus rank of a sampled channel (default: full).
        #[arg(long)]
        kraus_rank: Option<usize>,
        #[arg(long)]
        section: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let tol = cli.tol;
    match &cli.cmd {
        Cmd::Verify {
            kind,
            input,
            section,
            spec,
            method,
            outcome,
        } => {
            let opts = verify::Options {
                kind: *kind,
                section: section.clone(),
                spec: spec.clone(),
                method: *method,
                outcome: *outcome,
                tol,
            };
            if input.is_dir() {
                verify::verify_dir(input, &opts)
            } else {
                verify::verify(input, &opts)
            }
        }
        Cmd::Decompose {
            method,
            input,
            spec,
            section,
            a,
            b,
            out,
        } => decompose::run(&decompose::Options {
            method: *method,
            input: input.clone(),
            spec: spec.clone(),
            section: section.clone(),
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
            tol,
        }),
        Cmd::Link { a, b, output } => ops::link(a, b, output),
        Cmd::Apply {
            supermap,
            member,
            spec,
            output,
        } => ops::apply(supermap, member, spec, output.as_deref(), tol),
        Cmd::Equiv {
            x1,
            x2,
            spec,
            section,
        } => ops::equiv(x1, x2, spec.as_deref(), section.as_deref(), tol),
        Cmd::Sample {
            kind,
            seed,
            output,
            blocks,
            input_blocks,
            output_blocks,
            kraus_rank,
            section,
            spec,
        } => ops::sample(&ops::SampleOptions {
            kind: *kind,
            seed: *seed,
            output: output.clone(),
            blocks: blocks.clone(),
            input_blocks: input_blocks.clone(),
            output_blocks: output_blocks.clone(),
            kraus_rank: *kraus_rank,
            section: section.clone(),
            spec: spec.clone(),
            tol,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => out.emit(cli.json),
        Err(f) => f.emit(cli.json),
    }
}

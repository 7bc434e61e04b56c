use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use deforma::commands::{execute, Command, Element, Options};
use deforma::{Samples, Which};

/// Exact verification of the formal Berezin-Toeplitz calculus on one chart.
#[derive(Parser, Debug)]
#[command(name = "deforma", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Chart specification (JSON).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// ν-order K; defaults to the spec's nu_order.
    #[arg(long, global = true)]
    order: Option<i32>,
    /// Jet degree D; defaults to the spec's jet_degree.
    #[arg(long, global = true)]
    degree: Option<i32>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Seed for randomly drawn operands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StarArg {
    M,
    Tm,
    Dual,
    Prime,
}

impl From<StarArg> for Which {
    fn from(s: StarArg) -> Which {
        match s {
            StarArg::M => Which::M,
            StarArg::Tm => Which::Tm,
            StarArg::Dual => Which::Dual,
            StarArg::Prime => Which::Prime,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ElementArg {
    Q,
    T,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Star product of two operands.
    StarMul {
        #[arg(long, value_enum, default_value = "m")]
        star: StarArg,
        a: String,
        b: String,
    },
    /// Formal Berezin transform of an operand.
    Berezin {
        #[arg(long, value_enum, default_value = "m")]
        star: StarArg,
        a: String,
    },
    /// Normal-ordered symbol product at h = 1/N and as a polynomial in h.
    SymbolProduct {
        p: String,
        q: String,
        #[arg(long, default_value_t = 1)]
        n: i64,
    },
    /// Canonical trace density.
    TraceDensity {
        #[arg(long, value_enum, default_value = "m")]
        star: StarArg,
    },
    /// Q or T elements, and their bullet product when two operands are given.
    Toeplitz {
        #[arg(long, value_enum, default_value = "q")]
        element: ElementArg,
        a: String,
        b: Option<String>,
    },
    /// Run a verification suite, or `all`.
    Verify {
        suite: String,
        /// Draw a handful of operands instead of the full sample.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::StarMul { star, a, b } => Command::StarMul { star: star.into(), a, b },
        Cmd::Berezin { star, a } => Command::Berezin { star: star.into(), a },
        Cmd::SymbolProduct { p, q, n } => Command::SymbolProduct { p, q, n },
        Cmd::TraceDensity { star } => Command::TraceDensity { star: star.into() },
        Cmd::Toeplitz { element, a, b } => {
            let element = match element {
                ElementArg::Q => Element::Q,
                ElementArg::T => Element::T,
            };
            Command::Toeplitz { element, a, b }
        }
        Cmd::Verify { suite, quick } => {
            Command::Verify { suite, samples: if quick { Samples::quick() } else { Samples::default() } }
        }
    };
    let Some(spec) = cli.spec else {
        eprintln!("error: --spec <file> is required");
        return ExitCode::from(2);
    };
    let bytes = match std::fs::read(&spec) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", spec.display());
            return ExitCode::from(2);
        }
    };
    let opts = Options { order: cli.order, degree: cli.degree, seed: cli.seed };
    let (report, code) = execute(&command, &bytes, &opts);
    print!("{}", report.to_text());
    if let Some(path) = cli.json {
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(code as u8)
}

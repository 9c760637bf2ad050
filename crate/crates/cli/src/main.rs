mod commands;
mod plot;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kinswarm", version, about = "Attraction-repulsion swarms: minimizers, particle runs and ε-sweeps")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute and certify an energy minimizer.
    Minimize,
    /// Run the particle system.
    Simulate,
    /// ε-sweep against the limiting dynamics.
    Sweep,
    /// Run a property suite.
    Check {
        #[arg(value_parser = ["kernels", "minimizers", "coercivity", "ode", "modulated", "all"])]
        suite: String,
    },
    /// Render a CSV produced by another command as SVG.
    Plot {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Trajectory,
    Slope,
    Frostman,
}

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<kinswarm::error::Error> for Failure {
    fn from(e: kinswarm::error::Error) -> Self {
        use kinswarm::error::Error as E;
        let code = match e {
            E::Instability { .. } => 3,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(1, format!("i/o error: {e}"))
    }
}

pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Globals {
    pub fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let g = Globals { config: cli.config, out: cli.out, seed: cli.seed, quiet: cli.quiet };
    let result = match cli.command {
        Command::Minimize => commands::minimize(&g),
        Command::Simulate => commands::simulate(&g),
        Command::Sweep => commands::sweep(&g),
        Command::Check { suite } => commands::check(&g, &suite),
        Command::Plot { input, kind } => plot::plot(&g, &input, kind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};

use config::Options;

/// Exit status for invalid invocations.
const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "levytree", version, about = "Levy tree and Levy snake simulation with Monte Carlo verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate X, its running infimum I and the height process H
    SimulateTree(Options),
    /// Simulate the snake with its local time, A and the subordinate height process
    RunSnake(Options),
    /// Run a verification check (or `all`); exit 0 pass, 2 fail, 3 inconclusive
    Verify {
        /// Check name or `all`
        name: String,
        #[command(flatten)]
        options: Options,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::SimulateTree(o) => commands::simulate_tree(o),
        Command::RunSnake(o) => commands::run_snake(o),
        Command::Verify { name, options } => commands::verify(&name, options),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<levytree::Error>(), Some(levytree::Error::Domain(_) | levytree::Error::Resolution(_)));
            std::process::exit(if usage { EXIT_USAGE } else { 1 });
        }
    }
}

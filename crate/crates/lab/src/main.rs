use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use potlab::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "potlab", version, about = "Capacity, Poisson-integral and boundary-convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "potlab.toml")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent experiment items.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `section.key=value`; a bare key addresses `tolerances`. Repeatable.
    #[arg(long = "tol-override", global = true, value_name = "KEY=VAL")]
    tol_override: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Leaf count, dimension and Ahlfors constants.
    SpaceInfo,
    /// Capacities of configured target sets.
    Capacity,
    /// Capacities of nested balls and their asymptotics.
    BallProfile,
    /// Quasi-additivity over separated families.
    Quasiadd,
    /// Poisson normalization, Harnack and exceptional-set checks.
    Poisson,
    /// Exchange band between two depths.
    Exchange,
    /// Non-tangential and tangential convergence.
    Converge,
    /// Every experiment above.
    FullSuite,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::SpaceInfo => Command::SpaceInfo,
            Cmd::Capacity => Command::Capacity,
            Cmd::BallProfile => Command::BallProfile,
            Cmd::Quasiadd => Command::Quasiadd,
            Cmd::Poisson => Command::Poisson,
            Cmd::Exchange => Command::Exchange,
            Cmd::Converge => Command::Converge,
            Cmd::FullSuite => Command::FullSuite,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        command: cli.command.into(),
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        overrides: cli.tol_override,
    };
    match run(&opts) {
        Ok(report) => {
            for l in &report.outcome.lines {
                println!("{l}");
            }
            for c in &report.outcome.checks {
                println!("check {} value={} bound={} pass={}", c.name, c.value, c.bound, c.pass);
            }
            println!("all_pass={}", report.outcome.all_pass());
            if report.outcome.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(2)
        }
    }
}

//! Experiment runner for `potlab-core`: configuration, output files and the
//! subcommands of the `potlab` binary.

pub mod chart;
pub mod config;
pub mod error;
pub mod output;
pub mod spaceio;
pub mod suite;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{LabError, LabResult};
pub use output::{Check, Outcome, OutputDir, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SpaceInfo,
    Capacity,
    BallProfile,
    Quasiadd,
    Poisson,
    Exchange,
    Converge,
    FullSuite,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SpaceInfo,
        Command::Capacity,
        Command::BallProfile,
        Command::Quasiadd,
        Command::Poisson,
        Command::Exchange,
        Command::Converge,
        Command::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SpaceInfo => "space-info",
            Command::Capacity => "capacity",
            Command::BallProfile => "ball-profile",
            Command::Quasiadd => "quasiadd",
            Command::Poisson => "poisson",
            Command::Exchange => "exchange",
            Command::Converge => "converge",
            Command::FullSuite => "full-suite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn execute(self, cfg: &ExperimentConfig) -> LabResult<Outcome> {
        match self {
            Command::SpaceInfo => suite::space_info(cfg),
            Command::Capacity => suite::capacity(cfg),
            Command::BallProfile => suite::ball_profile(cfg),
            Command::Quasiadd => suite::quasiadd(cfg),
            Command::Poisson => suite::poisson(cfg),
            Command::Exchange => suite::exchange(cfg),
            Command::Converge => suite::converge(cfg),
            Command::FullSuite => suite::full_suite(cfg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    pub overrides: Vec<String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    pub config_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads the config, runs the command and writes every artifact.
///
/// On any error the files written by this run are removed again.
pub fn run(opts: &RunOptions) -> LabResult<RunReport> {
    let start = Instant::now();
    let loaded = config::load(&opts.config, &opts.overrides, opts.seed)?;
    let cfg = &loaded.config;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| LabError::Threads(e.to_string()))?;
    let outcome = pool.install(|| opts.command.execute(cfg))?;
    let hash = sha256_hex(loaded.canonical.as_bytes());
    let mut dir = OutputDir::create(&opts.out)?;
    match write_all(&mut dir, opts.command, cfg, &outcome, &hash, start) {
        Ok(()) => Ok(RunReport { files: dir.written().to_vec(), outcome, config_hash: hash }),
        Err(e) => {
            dir.discard();
            Err(e)
        }
    }
}

fn write_all(
    dir: &mut OutputDir,
    command: Command,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    hash: &str,
    start: Instant,
) -> LabResult<()> {
    for t in &outcome.tables {
        dir.write(&t.file_name(), &t.to_csv()?)?;
    }
    let checks = outcome.checks_table();
    dir.write(&checks.file_name(), &checks.to_csv()?)?;
    for (name, body) in &outcome.files {
        dir.write(name, body.as_bytes())?;
    }
    let mut files: Vec<String> = dir
        .written()
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.push("manifest.toml".into());
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut m = toml::Table::new();
    m.insert("command".into(), command.name().into());
    m.insert("config_sha256".into(), hash.into());
    m.insert("seed".into(), cfg.seed.to_string().into());
    m.insert("potlab_version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("wall_time_seconds".into(), start.elapsed().as_secs_f64().into());
    m.insert("timestamp_unix".into(), toml::Value::Integer(timestamp as i64));
    m.insert("all_pass".into(), outcome.all_pass().into());
    m.insert("files".into(), toml::Value::Array(files.into_iter().map(toml::Value::from).collect()));
    let text = toml::to_string(&m).map_err(|e| LabError::config("manifest", e.to_string()))?;
    dir.write("manifest.toml", text.as_bytes())?;
    Ok(())
}

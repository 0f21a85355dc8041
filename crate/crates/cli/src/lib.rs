//! Command-line pipeline over the `rowcrop` library.
//!
//! Every subcommand resolves one [`config::RunConfig`] (defaults, then the
//! `--config` file, then flags), validates it, runs its stage and writes a
//! [`manifest::RunManifest`] with SHA-256 digests of all inputs and outputs.
//! On failure every file the command wrote is removed again.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod overlay;
pub mod stages;

use args::{Cli, Command};
use commands::Session;
use config::RunConfig;
use error::{CliError, CliResult};

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment(_) => "segment",
            Command::DetectRows(_) => "detect-rows",
            Command::WeedMap(_) => "weed-map",
            Command::Prescribe(_) => "prescribe",
            Command::SimulateSpray(_) => "simulate-spray",
            Command::EvaluateRows(_) => "evaluate-rows",
            Command::Stats(_) => "stats",
            Command::Synth(_) => "synth",
            Command::Pipeline(_) => "pipeline",
            Command::Overlay(_) => "overlay",
        }
    }

    fn apply_flags(&self, cfg: &mut RunConfig) {
        match self {
            Command::Segment(c) => c.params.apply(cfg),
            Command::DetectRows(c) => c.params.apply(cfg),
            Command::WeedMap(c) => c.params.apply(cfg),
            Command::Prescribe(c) => c.params.apply(cfg),
            Command::SimulateSpray(c) => c.params.apply(cfg),
            Command::EvaluateRows(c) => {
                c.tiles.apply(cfg);
                if c.match_tolerance_m.is_some() {
                    cfg.match_tolerance_m = c.match_tolerance_m;
                }
            }
            Command::Stats(c) => {
                if let Some(a) = c.alpha {
                    cfg.alpha = a;
                }
            }
            Command::Synth(c) => c.apply(cfg),
            Command::Pipeline(c) => {
                c.segment.apply(cfg);
                c.detect.apply(cfg);
                c.weeds.apply(cfg);
                c.grid.apply(cfg);
                c.sprayer.apply(cfg);
            }
            Command::Overlay(_) => {}
        }
    }
}

/// Defaults, overlaid by the config file, overlaid by flags; then validated.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.command.apply_flags(&mut cfg);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    init_threads(cfg.threads)?;
    let mut session = Session::new(cli.command.name(), &cfg);
    let result = match &cli.command {
        Command::Segment(c) => commands::segment(c, &cfg, &mut session),
        Command::DetectRows(c) => commands::detect_rows(c, &cfg, &mut session),
        Command::WeedMap(c) => commands::weed_map(c, &cfg, &mut session),
        Command::Prescribe(c) => commands::prescribe(c, &cfg, &mut session),
        Command::SimulateSpray(c) => commands::simulate_spray(c, &cfg, &mut session),
        Command::EvaluateRows(c) => commands::evaluate_rows(c, &cfg, &mut session),
        Command::Stats(c) => commands::stats(c, &cfg, &mut session),
        Command::Synth(c) => commands::synth(c, &cfg, &mut session),
        Command::Pipeline(c) => commands::pipeline(c, &cfg, &mut session),
        Command::Overlay(c) => commands::overlay(c, &cfg, &mut session),
    };
    if result.is_err() {
        session.cleanup();
    }
    result
}

/// Parses `args` (including the program name) and runs them.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
    run(&cli)
}

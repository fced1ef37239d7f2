//! Scenario layer over [`sislab`]: TOML configuration, figure bundles
//! (profile and summary CSVs, SVG panels), reproduction-number tables,
//! simulations, sweeps and limiting profiles.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod scenario;
pub mod svg;

use std::path::PathBuf;

pub use config::{FigureTag, ScenarioConfig};
pub use error::{CliError, Result};
pub use scenario::{run_scenario, FigureBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    R0,
    Simulate,
    Steady,
    Sweep,
    Limit,
    Reproduce(FigureTag),
    Report,
}

/// Runs `cmd` and writes its files to `cfg.out_dir`.
///
/// Files for the models that succeeded are written even when others
/// fail; the error then reports how many failed.
pub fn execute(cmd: Command, cfg: &ScenarioConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    let (written, failures) = match cmd {
        Command::R0 => {
            let csv = report::r0_report(cfg)?;
            (output::write_files(dir, &[("r0.csv".into(), csv)])?, Vec::new())
        }
        Command::Report => {
            let (csv, md) = report::overview(cfg)?;
            (output::write_files(dir, &[("report.csv".into(), csv), ("report.md".into(), md)])?, Vec::new())
        }
        Command::Steady | Command::Reproduce(_) => {
            let b = run_scenario(cfg)?;
            (b.write(dir)?, b.failures)
        }
        Command::Simulate => {
            let e = scenario::simulate(cfg)?;
            (e.write(dir)?, e.failures)
        }
        Command::Sweep => {
            let e = scenario::sweeps(cfg)?;
            (e.write(dir)?, e.failures)
        }
        Command::Limit => {
            let e = scenario::limits(cfg)?;
            (e.write(dir)?, e.failures)
        }
    };
    if failures.is_empty() {
        return Ok(written);
    }
    for f in &failures {
        eprintln!("{}: {}", f.model, f.error);
    }
    // a failure set made only of refusals is an input problem
    if failures.iter().all(|f| f.error.exit_code() == 2) && failures.len() == cfg.models.len() {
        return Err(failures.into_iter().next().expect("nonempty").error);
    }
    Err(CliError::Partial { failed: failures.len(), total: cfg.models.len() })
}

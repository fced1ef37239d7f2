use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sislab::ModelKind;
use sislab_cli::{execute, CliError, Command, FigureTag, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sislab", version, about = "Spatial SIS epidemic models: R0, dynamics, steady states, figures")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario file (TOML); defaults to fig0a at d_S = d_I = 1
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of grid cells (overrides the config)
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Comma-separated models, e.g. MW,SO (overrides the config)
    #[arg(long, global = true, value_delimiter = ',')]
    model: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// R0, principal eigenvalue and d_I limits for every configured pair
    R0,
    /// Time simulation from the default initial data
    Simulate,
    /// Steady profiles at the configured point, as a figure bundle
    Steady,
    /// Continuation sweep along the configured schedule
    Sweep,
    /// Limiting profiles (MW d_S -> 0, MO joint limit, SO d_I -> 0)
    Limit,
    /// Rebuild one of the four figure bundles
    Reproduce {
        #[arg(value_parser = ["fig1", "fig2", "fig3", "fig4"])]
        figure: String,
    },
    /// R0 overview table across d_I
    Report,
}

fn configure(cli: &Cli) -> Result<(Command, ScenarioConfig), CliError> {
    let (cmd, base) = match &cli.command {
        Cmd::Reproduce { figure } => {
            let tag: FigureTag = figure.parse()?;
            let cfg = match &cli.config {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::figure(tag)?,
            };
            (Command::Reproduce(tag), cfg)
        }
        other => {
            let cmd = match other {
                Cmd::R0 => Command::R0,
                Cmd::Simulate => Command::Simulate,
                Cmd::Steady => Command::Steady,
                Cmd::Sweep => Command::Sweep,
                Cmd::Limit => Command::Limit,
                Cmd::Report => Command::Report,
                Cmd::Reproduce { .. } => unreachable!(),
            };
            let cfg = match &cli.config {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::default(),
            };
            (cmd, cfg)
        }
    };
    let mut cfg = base;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(n) = cli.grid {
        cfg.grid.n_cells = n;
    }
    if let Some(models) = &cli.model {
        cfg.models = models.iter().map(|m| m.parse::<ModelKind>()).collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok((cmd, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure(&cli).and_then(|(cmd, cfg)| execute(cmd, &cfg));
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

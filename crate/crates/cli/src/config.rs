//! Scenario configuration, read from and written to TOML.
//!
//! ```toml
//! figure = "fig2"
//! models = ["MO", "MW", "SO", "SW"]
//! out_dir = "out/fig2"
//!
//! [grid]
//! n_cells = 800
//!
//! [coefficients]
//! source = "preset"
//! name = "fig0a"
//! total_mass = 1.0
//!
//! [run]
//! mode = "sweep"
//! target = "di_to_zero"
//! fixed = 1.0
//! schedule = [1.0, 0.1, 0.01, 0.001, 0.0001, 0.00001]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sislab::coeffs::{from_csv, from_expressions, preset_fig0a, preset_homogeneous, preset_moderate};
use sislab::dynamics::{Scheme, StepperConfig};
use sislab::steady::{SweepTarget, DEFAULT_TOL};
use sislab::{CoefficientSet, Grid, ModelKind};

use crate::error::{CliError, Result};

pub const PRESETS: [&str; 2] = ["fig0a", "moderate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureTag {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl FigureTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FigureTag::Fig1 => "fig1",
            FigureTag::Fig2 => "fig2",
            FigureTag::Fig3 => "fig3",
            FigureTag::Fig4 => "fig4",
            FigureTag::Custom => "custom",
        }
    }
}

impl fmt::Display for FigureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureTag {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(FigureTag::Fig1),
            "fig2" => Ok(FigureTag::Fig2),
            "fig3" => Ok(FigureTag::Fig3),
            "fig4" => Ok(FigureTag::Fig4),
            "custom" => Ok(FigureTag::Custom),
            _ => Err(CliError::invalid(format!("unknown figure {s:?} (fig1 | fig2 | fig3 | fig4 | custom)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientConfig {
    Preset {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    Homogeneous {
        lambda: f64,
        beta: f64,
        gamma: f64,
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    /// Closed-form expressions in `x`, e.g. `beta = "1.5 + sin(2*pi*x)"`.
    Expressions {
        lambda: String,
        beta: String,
        gamma: String,
        mu: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    /// CSV with columns `x,lambda,beta,gamma,mu` at the grid nodes.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    DsToZero,
    DiToZero,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunConfig {
    /// One diffusivity pair, seeded directly by a dynamics run.
    Point { d_s: f64, d_i: f64 },
    /// Continuation along `schedule`; `fixed` is the held diffusivity, or
    /// the ratio `d_I / d_S` for `both`. The last entry is the figure point.
    Sweep {
        target: TargetKind,
        fixed: f64,
        schedule: Vec<f64>,
    },
}

impl RunConfig {
    pub fn sweep_target(&self) -> Option<SweepTarget> {
        match *self {
            RunConfig::Point { .. } => None,
            RunConfig::Sweep { target, fixed, .. } => Some(match target {
                TargetKind::DsToZero => SweepTarget::DsToZero { d_i: fixed },
                TargetKind::DiToZero => SweepTarget::DiToZero { d_s: fixed },
                TargetKind::Both => SweepTarget::Both { ratio: fixed },
            }),
        }
    }

    /// Every `(d_S, d_I)` pair visited, in order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        match self {
            RunConfig::Point { d_s, d_i } => vec![(*d_s, *d_i)],
            RunConfig::Sweep { schedule, .. } => {
                let t = self.sweep_target().expect("sweep has a target");
                schedule.iter().map(|&x| t.diffusivities(x)).collect()
            }
        }
    }

    /// The pair the figure profiles are taken at.
    pub fn final_pair(&self) -> (f64, f64) {
        *self.pairs().last().expect("validated run has at least one pair")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL }
    }
}

/// Time-stepping settings for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub scheme: String,
    pub dt_initial: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub trace_stride: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let d = StepperConfig::default();
        DynamicsConfig {
            scheme: d.scheme.as_str().to_string(),
            dt_initial: d.dt_initial,
            t_max: d.t_max,
            steady_tol: d.steady_tol,
            trace_stride: d.trace_stride,
        }
    }
}

impl DynamicsConfig {
    pub fn stepper(&self) -> Result<StepperConfig> {
        let cfg = StepperConfig {
            scheme: self.scheme.parse::<Scheme>()?,
            dt_initial: self.dt_initial,
            t_max: self.t_max,
            steady_tol: self.steady_tol,
            trace_stride: self.trace_stride,
            ..StepperConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub figure: FigureTag,
    #[serde(with = "model_names")]
    pub models: Vec<ModelKind>,
    pub out_dir: PathBuf,
    pub grid: GridConfig,
    pub coefficients: CoefficientConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

mod model_names {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use sislab::ModelKind;

    pub fn serialize<S: Serializer>(models: &[ModelKind], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(models.iter().map(|m| m.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ModelKind>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(D::Error::custom))
            .collect()
    }
}

fn decades(from: i32, to: i32) -> Vec<f64> {
    (to..=from).rev().map(|k| 10f64.powi(k)).collect()
}

impl Default for ScenarioConfig {
    /// All four models on `fig0a` at `d_S = d_I = 1`.
    fn default() -> Self {
        ScenarioConfig {
            figure: FigureTag::Custom,
            models: ModelKind::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            grid: GridConfig { n_cells: 400 },
            coefficients: CoefficientConfig::Preset { name: "fig0a".into(), total_mass: Some(1.0) },
            run: RunConfig::Point { d_s: 1.0, d_i: 1.0 },
            solver: SolverConfig::default(),
            dynamics: DynamicsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Built-in configuration for one of the four figures.
    pub fn figure(tag: FigureTag) -> Result<Self> {
        let sweep = |target, fixed, schedule| RunConfig::Sweep { target, fixed, schedule };
        let (preset, n_cells, run) = match tag {
            FigureTag::Fig1 => ("fig0a", 400, sweep(TargetKind::DsToZero, 1.0, decades(0, -6))),
            FigureTag::Fig2 => ("fig0a", 800, sweep(TargetKind::DiToZero, 1.0, decades(0, -5))),
            FigureTag::Fig3 => ("fig0a", 800, sweep(TargetKind::Both, 1.0, decades(0, -5))),
            FigureTag::Fig4 => ("moderate", 800, sweep(TargetKind::DiToZero, 1.0, decades(0, -5))),
            FigureTag::Custom => return Err(CliError::invalid("custom scenarios need a config file")),
        };
        Ok(ScenarioConfig {
            figure: tag,
            out_dir: PathBuf::from("out").join(tag.as_str()),
            grid: GridConfig { n_cells },
            coefficients: CoefficientConfig::Preset { name: preset.into(), total_mass: Some(1.0) },
            run,
            ..ScenarioConfig::default()
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::invalid(e.to_string()))
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(CliError::invalid("no models selected"));
        }
        let mut seen = self.models.clone();
        seen.sort_by_key(|m| m.as_str());
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(CliError::invalid("models listed more than once"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.grid.n_cells < 2 {
            return Err(CliError::invalid("grid.n_cells must be at least 2"));
        }
        match &self.coefficients {
            CoefficientConfig::Preset { name, total_mass } => {
                if !PRESETS.contains(&name.as_str()) {
                    return Err(CliError::invalid(format!("unknown preset {name:?} (expected one of {PRESETS:?})")));
                }
                if name == "moderate" && !self.grid.n_cells.is_multiple_of(4) {
                    return Err(CliError::invalid(format!(
                        "the moderate preset needs grid.n_cells divisible by 4, got {}",
                        self.grid.n_cells
                    )));
                }
                if let Some(n) = total_mass {
                    positive("total_mass", *n)?;
                }
            }
            CoefficientConfig::Homogeneous { lambda, beta, gamma, mu, total_mass } => {
                for (name, v) in [("lambda", lambda), ("beta", beta), ("gamma", gamma), ("mu", mu)] {
                    positive(name, *v)?;
                }
                if let Some(n) = total_mass {
                    positive("total_mass", *n)?;
                }
            }
            CoefficientConfig::Expressions { total_mass, .. } | CoefficientConfig::File { total_mass, .. } => {
                if let Some(n) = total_mass {
                    positive("total_mass", *n)?;
                }
            }
        }
        match &self.run {
            RunConfig::Point { d_s, d_i } => {
                positive("run.d_s", *d_s)?;
                positive("run.d_i", *d_i)?;
            }
            RunConfig::Sweep { fixed, schedule, .. } => {
                positive("run.fixed", *fixed)?;
                if schedule.is_empty() {
                    return Err(CliError::invalid("run.schedule is empty"));
                }
                for &x in schedule {
                    positive("run.schedule entry", x)?;
                }
                if schedule.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(CliError::invalid("run.schedule must be strictly decreasing"));
                }
            }
        }
        positive("solver.tol", self.solver.tol)?;
        self.dynamics.stepper()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Ok(Grid::unit(self.grid.n_cells)?)
    }

    pub fn build_coefficients(&self, grid: &Grid) -> Result<CoefficientSet> {
        let (set, mass) = match &self.coefficients {
            CoefficientConfig::Preset { name, total_mass } => {
                let set = match name.as_str() {
                    "fig0a" => preset_fig0a(grid)?,
                    "moderate" => preset_moderate(grid)?,
                    other => return Err(CliError::invalid(format!("unknown preset {other:?}"))),
                };
                (set, *total_mass)
            }
            CoefficientConfig::Homogeneous { lambda, beta, gamma, mu, total_mass } => {
                (preset_homogeneous(grid, *lambda, *beta, *gamma, *mu)?, *total_mass)
            }
            CoefficientConfig::Expressions { lambda, beta, gamma, mu, total_mass } => {
                (from_expressions(grid, lambda, beta, gamma, mu, *total_mass)?, *total_mass)
            }
            CoefficientConfig::File { path, total_mass } => (from_csv(grid, path, *total_mass)?, *total_mass),
        };
        Ok(match mass {
            Some(n) => set.with_total_mass(n)?,
            None => set,
        })
    }
}

//! Scenario pipelines: steady profiles for figures, time simulations,
//! continuation sweeps and limiting profiles.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sislab::coeffs::{classify_risk, MODERATE_TOL};
use sislab::dynamics::{default_initial_state, run, System};
use sislab::spectral::compute_r0;
use sislab::steady::{
    mo_limit_wu_zou, mw_limit_ds0, so_limit_peng, steady_from_dynamics, sweep, Branch, SweepResult, SUPPORT_THRESHOLD,
};
use sislab::{CoefficientSet, Field, Grid, ModelKind};

use crate::config::{FigureTag, RunConfig, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::output::{csv_string, num, profile_csv, write_files, ProfileStats, STATS_HEADER};
use crate::svg::{emit_svg, Panel, Series};

#[derive(Debug, Clone)]
pub struct ModelProfile {
    pub model: ModelKind,
    pub d_s: f64,
    pub d_i: f64,
    pub r0: f64,
    pub branch: Branch,
    pub s: Field,
    pub i: Field,
    pub stats: ProfileStats,
}

#[derive(Debug)]
pub struct ModelFailure {
    pub model: ModelKind,
    pub error: CliError,
}

#[derive(Debug)]
pub struct FigureBundle {
    pub figure: FigureTag,
    pub grid: Grid,
    pub profiles: Vec<ModelProfile>,
    pub failures: Vec<ModelFailure>,
    /// S and I panels; absent when no model succeeded.
    pub panels: Option<(String, String)>,
    /// Structural observations per model, for the bundle README.
    pub notes: Vec<String>,
    pub readme: String,
}

pub const SUMMARY_HEADER: [&str; 10] = ["model", "d_S", "d_I", "R0", "min_S", "max_S", "min_I", "max_I", "int_I", "support_frac"];

impl FigureBundle {
    pub fn summary_csv(&self) -> Result<String> {
        let rows = self.profiles.iter().map(|p| {
            let mut r = vec![p.model.to_string(), num(p.d_s), num(p.d_i), num(p.r0)];
            r.extend(p.stats.cells());
            r
        });
        csv_string(&SUMMARY_HEADER, rows)
    }

    /// File names and contents, in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let mut files = Vec::new();
        for p in &self.profiles {
            files.push((format!("profile_{}.csv", p.model), profile_csv(&self.grid, &p.s, &p.i)?));
        }
        files.push(("summary.csv".into(), self.summary_csv()?));
        if let Some((s, i)) = &self.panels {
            files.push(("panel_S.svg".into(), s.clone()));
            files.push(("panel_I.svg".into(), i.clone()));
        }
        files.push(("README.md".into(), self.readme.clone()));
        Ok(files)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_files(dir, &self.files()?)
    }
}

/// Steady state at the configured point: a dynamics seed refined by
/// Newton, with continuation along the schedule for sweep runs.
fn solve_model(kind: ModelKind, cfg: &ScenarioConfig, coeffs: &CoefficientSet, grid: &Grid) -> Result<ModelProfile> {
    let (d_s, d_i) = cfg.run.final_pair();
    let result = match &cfg.run {
        RunConfig::Point { .. } => steady_from_dynamics(kind, d_s, d_i, coeffs, grid, cfg.solver.tol)?,
        RunConfig::Sweep { schedule, .. } => {
            let target = cfg.run.sweep_target().expect("sweep run");
            let s = sweep(kind, target, coeffs, grid, schedule, cfg.solver.tol)?;
            if let Some(f) = s.failure {
                return Err(f.error.into());
            }
            s.entries.into_iter().last().expect("sweep without failure has entries").result
        }
    };
    let r0 = compute_r0(kind, d_i, d_s, coeffs, grid)?.value;
    let stats = ProfileStats::of(grid, &result.s, &result.i)?;
    Ok(ModelProfile { model: kind, d_s, d_i, r0, branch: result.branch, s: result.s, i: result.i, stats })
}

/// Number of maximal runs of nodes where `I > SUPPORT_THRESHOLD · max I`.
pub fn support_components(i: &Field) -> usize {
    let level = SUPPORT_THRESHOLD * i.max();
    let above: Vec<bool> = i.values().iter().map(|&v| v > level).collect();
    above.iter().enumerate().filter(|&(k, &a)| a && (k == 0 || !above[k - 1])).count()
}

fn figure_notes(tag: FigureTag, profiles: &[ModelProfile], coeffs: &CoefficientSet) -> Vec<String> {
    let mut notes = Vec::new();
    let verdict = |ok: bool| if ok { "holds" } else { "does not hold" };
    for p in profiles {
        let m = p.model;
        let st = &p.stats;
        let line = match (tag, m) {
            (FigureTag::Fig1, ModelKind::SO) => format!("SO: max I = {:.3e}; expected <= 1e-3, {}", st.max_i, verdict(st.max_i <= 1e-3)),
            (FigureTag::Fig1, ModelKind::MO) => format!("MO: max I = {:.3e}; expected <= 1e-2, {}", st.max_i, verdict(st.max_i <= 1e-2)),
            (FigureTag::Fig1, _) => format!("{m}: min I = {:.3e}; expected > 0, {}", st.min_i, verdict(st.min_i > 0.0)),
            (FigureTag::Fig4, ModelKind::MW) => {
                let n = support_components(&p.i);
                format!("MW: I support has {n} component(s); expected 2, {}", verdict(n == 2))
            }
            (FigureTag::Fig4, _) => {
                let risk = classify_risk(coeffs, MODERATE_TOL);
                let level = SUPPORT_THRESHOLD * st.max_i;
                let outside = (0..p.i.len()).filter(|&k| p.i[k] > level && !risk.is_high(k)).count();
                format!("{m}: {outside} non-high-risk node(s) above 1e-3 max I; expected 0, {}", verdict(outside == 0))
            }
            (FigureTag::Fig2, ModelKind::MW) => {
                format!("MW: int I = {:.5}, S flatness max S - min S = {:.3e}", st.int_i, st.max_s - st.min_s)
            }
            _ => format!(
                "{m}: max I = {:.3e}, int I = {:.3e}, support fraction {:.3}",
                st.max_i, st.int_i, st.support_frac
            ),
        };
        notes.push(line);
    }
    notes
}

fn describe_run(run: &RunConfig) -> String {
    match run {
        RunConfig::Point { d_s, d_i } => format!("Steady profiles at d_S = {d_s:e}, d_I = {d_i:e}, seeded by a dynamics run."),
        RunConfig::Sweep { target, fixed, schedule } => {
            let path: Vec<String> = schedule.iter().map(|x| format!("{x:e}")).collect();
            let (d_s, d_i) = run.final_pair();
            format!(
                "Steady profiles at d_S = {d_s:e}, d_I = {d_i:e}, reached by continuation ({target:?}, fixed {fixed:e}) over {}.",
                path.join(", ")
            )
        }
    }
}

fn readme(cfg: &ScenarioConfig, profiles: &[ModelProfile], failures: &[ModelFailure], notes: &[String]) -> String {
    let mut out = String::new();
    let w = &mut out;
    let models: Vec<&str> = cfg.models.iter().map(|m| m.as_str()).collect();
    let _ = writeln!(w, "# {} bundle\n", cfg.figure);
    let _ = writeln!(w, "Models: {}. Grid: {} cells on [0, 1].", models.join(", "), cfg.grid.n_cells);
    let _ = writeln!(w, "{}\n", describe_run(&cfg.run));
    let _ = writeln!(w, "## Files\n");
    for p in profiles {
        let _ = writeln!(w, "- `profile_{}.csv`: `x,S,I` at every node", p.model);
    }
    let _ = writeln!(w, "- `summary.csv`: `{}`", SUMMARY_HEADER.join(","));
    if !profiles.is_empty() {
        let _ = writeln!(w, "- `panel_S.svg`, `panel_I.svg`: S and I profiles, one polyline per model");
    }
    let _ = writeln!(w, "\nEvery summary value is computed from the profile values as written.");
    if !notes.is_empty() {
        let _ = writeln!(w, "\n## Panel notes\n");
        let _ = writeln!(
            w,
            "The reference figures carry no numeric curves, so each panel is checked for structure \
             (support, positivity, size) rather than pointwise values.\n"
        );
        for n in notes {
            let _ = writeln!(w, "- {n}");
        }
    }
    if !failures.is_empty() {
        let _ = writeln!(w, "\n## Failures\n");
        for f in failures {
            let _ = writeln!(w, "- {}: {}", f.model, f.error);
        }
    }
    out
}

fn panel(title: &str, y_label: &str, grid: &Grid, profiles: &[ModelProfile], pick: fn(&ModelProfile) -> &Field) -> Result<String> {
    let series = profiles
        .iter()
        .map(|p| Series {
            label: p.model.to_string(),
            points: grid.nodes().iter().copied().zip(pick(p).values().iter().copied()).collect(),
        })
        .collect();
    emit_svg(&Panel { title: title.into(), x_label: "x".into(), y_label: y_label.into(), series })
}

/// Solves every selected model concurrently and assembles the bundle.
///
/// Per-model solver failures are recorded in the bundle; configuration
/// and coefficient errors abort before any solve.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<FigureBundle> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let coeffs = cfg.build_coefficients(&grid)?;
    let outcomes: Vec<(ModelKind, Result<ModelProfile>)> =
        cfg.models.par_iter().map(|&k| (k, solve_model(k, cfg, &coeffs, &grid))).collect();
    let mut profiles = Vec::new();
    let mut failures = Vec::new();
    for (model, r) in outcomes {
        match r {
            Ok(p) => profiles.push(p),
            Err(error) => failures.push(ModelFailure { model, error }),
        }
    }
    let panels = if profiles.is_empty() {
        None
    } else {
        let (d_s, d_i) = cfg.run.final_pair();
        let suffix = format!("{}, d_S = {d_s:e}, d_I = {d_i:e}", cfg.figure);
        Some((
            panel(&format!("S ({suffix})"), "S(x)", &grid, &profiles, |p| &p.s)?,
            panel(&format!("I ({suffix})"), "I(x)", &grid, &profiles, |p| &p.i)?,
        ))
    };
    let notes = figure_notes(cfg.figure, &profiles, &coeffs);
    let readme = readme(cfg, &profiles, &failures, &notes);
    Ok(FigureBundle { figure: cfg.figure, grid, profiles, failures, panels, notes, readme })
}

/// Outcome of per-model work that writes files: what was written and
/// which models failed.
#[derive(Debug, Default)]
pub struct Emitted {
    pub files: Vec<(String, String)>,
    pub failures: Vec<ModelFailure>,
}

impl Emitted {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_files(dir, &self.files)
    }
}

pub const TRACE_HEADER: [&str; 7] = ["t", "dt", "total_S", "total_I", "min_I", "max_S", "lyapunov"];

/// Time simulation from the default initial data at the configured point.
/// Emits `trace_<model>.csv`, `final_<model>.csv` and `simulate.csv`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Emitted> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let coeffs = cfg.build_coefficients(&grid)?;
    let stepper = cfg.dynamics.stepper()?;
    let (d_s, d_i) = cfg.run.final_pair();
    let outcomes: Vec<_> = cfg
        .models
        .par_iter()
        .map(|&kind| {
            let go = || -> Result<_> {
                let sys = System::new(kind, &grid, &coeffs, d_s, d_i)?;
                let init = default_initial_state(kind, &coeffs, &grid, d_s)?;
                Ok(run(init, &sys, &stepper)?)
            };
            (kind, go())
        })
        .collect();
    let mut out = Emitted::default();
    let mut summary = Vec::new();
    for (kind, r) in outcomes {
        match r {
            Ok(r) => {
                let rows = r.trace.samples.iter().map(|s| {
                    vec![
                        num(s.t),
                        num(s.dt),
                        num(s.total_s),
                        num(s.total_i),
                        num(s.min_i),
                        num(s.max_s),
                        s.lyapunov.map(num).unwrap_or_default(),
                    ]
                });
                out.files.push((format!("trace_{kind}.csv"), csv_string(&TRACE_HEADER, rows)?));
                out.files.push((format!("final_{kind}.csv"), profile_csv(&grid, &r.state.s, &r.state.i)?));
                summary.push(vec![kind.to_string(), num(d_s), num(d_i), r.verdict.as_str().into(), r.steps.to_string(), num(r.state.t)]);
            }
            Err(error) => out.failures.push(ModelFailure { model: kind, error }),
        }
    }
    out.files.push(("simulate.csv".into(), csv_string(&["model", "d_S", "d_I", "verdict", "steps", "t_final"], summary)?));
    Ok(out)
}

pub const SWEEP_HEADER: [&str; 3] = ["diffusivity", "d_S", "d_I"];

fn sweep_csv(s: &SweepResult, grid: &Grid) -> Result<String> {
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    header.extend(STATS_HEADER);
    let mut rows = Vec::new();
    for e in &s.entries {
        let mut r = vec![num(e.diffusivity), num(e.d_s), num(e.d_i)];
        r.extend(ProfileStats::of(grid, &e.result.s, &e.result.i)?.cells());
        rows.push(r);
    }
    csv_string(&header, rows)
}

/// Continuation sweep per model. Emits `sweep_<model>.csv` (one row per
/// converged entry, including those before a failure) and the profile at
/// the last converged entry.
pub fn sweeps(cfg: &ScenarioConfig) -> Result<Emitted> {
    cfg.validate()?;
    let RunConfig::Sweep { schedule, .. } = &cfg.run else {
        return Err(CliError::invalid("the sweep command needs run.mode = \"sweep\""));
    };
    let target = cfg.run.sweep_target().expect("sweep run");
    let grid = cfg.build_grid()?;
    let coeffs = cfg.build_coefficients(&grid)?;
    let outcomes: Vec<_> = cfg
        .models
        .par_iter()
        .map(|&k| (k, sweep(k, target, &coeffs, &grid, schedule, cfg.solver.tol)))
        .collect();
    let mut out = Emitted::default();
    for (kind, r) in outcomes {
        match r {
            Ok(mut s) => {
                out.files.push((format!("sweep_{kind}.csv"), sweep_csv(&s, &grid)?));
                if let Some(e) = s.entries.last() {
                    out.files.push((format!("profile_{kind}.csv"), profile_csv(&grid, &e.result.s, &e.result.i)?));
                }
                if let Some(f) = s.failure.take() {
                    let error = CliError::Core(f.error);
                    out.failures.push(ModelFailure { model: kind, error });
                }
            }
            Err(e) => out.failures.push(ModelFailure { model: kind, error: e.into() }),
        }
    }
    Ok(out)
}

/// Closed-form or reduced limiting profile per model, at the configured
/// point: MW as `d_S → 0` with the point's `d_I`; MO jointly and SO as
/// `d_I → 0`, both with `d = d_I / d_S`. SW has no limit formula and is
/// skipped.
pub fn limits(cfg: &ScenarioConfig) -> Result<Emitted> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let coeffs = cfg.build_coefficients(&grid)?;
    let (d_s, d_i) = cfg.run.final_pair();
    let ratio = d_i / d_s;
    let mut out = Emitted::default();
    let mut rows = Vec::new();
    for &kind in &cfg.models {
        let r = match kind {
            ModelKind::MW => mw_limit_ds0(d_i, &coeffs, &grid, None, cfg.solver.tol),
            ModelKind::MO => coeffs.total_mass().and_then(|n| mo_limit_wu_zou(ratio, &coeffs, &grid, n)),
            ModelKind::SO => coeffs.total_mass().and_then(|n| so_limit_peng(ratio, &coeffs, &grid, n)),
            ModelKind::SW => continue,
        };
        match r {
            Ok(l) => {
                out.files.push((format!("limit_{kind}.csv"), profile_csv(&grid, &l.s, &l.i)?));
                rows.push(vec![kind.to_string(), l.formula.label(), num(l.total_i)]);
            }
            Err(e) => out.failures.push(ModelFailure { model: kind, error: e.into() }),
        }
    }
    out.files.push(("limits.csv".into(), csv_string(&["model", "formula", "int_I"], rows)?));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_count_runs() {
        let g = Grid::unit(9).unwrap();
        let i = g.field(vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(support_components(&i), 3);
    }

    #[test]
    fn homogeneous_point_scenario() {
        let mut cfg = ScenarioConfig::default();
        cfg.grid.n_cells = 40;
        cfg.models = vec![ModelKind::MW];
        cfg.coefficients = crate::config::CoefficientConfig::Homogeneous {
            lambda: 3.0,
            beta: 1.0,
            gamma: 1.0,
            mu: 1.0,
            total_mass: None,
        };
        let b = run_scenario(&cfg).unwrap();
        assert!(b.failures.is_empty());
        let p = &b.profiles[0];
        assert!((p.r0 - 1.5).abs() < 1e-12);
        assert!((p.stats.max_s - 2.0).abs() < 1e-8 && (p.stats.min_i - 1.0).abs() < 1e-8);
    }
}

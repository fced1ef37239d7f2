//! Reproduction-number tables.

use rayon::prelude::*;
use sislab::spectral::{compute_r0, lambda_star, r0_limits};
use sislab::ModelKind;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::output::{csv_string, num};

pub const R0_HEADER: [&str; 7] = ["model", "d_I", "d_S", "R0", "lambda_star", "R0_limit_di_zero", "R0_limit_di_inf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Row {
    pub model: ModelKind,
    pub d_i: f64,
    pub d_s: f64,
    pub r0: f64,
    pub lambda_star: f64,
    /// `R0` as `d_I → 0` and `d_I → ∞`.
    pub limits: (f64, f64),
}

impl R0Row {
    fn cells(&self) -> Vec<String> {
        vec![
            self.model.to_string(),
            num(self.d_i),
            num(self.d_s),
            num(self.r0),
            num(self.lambda_star),
            num(self.limits.0),
            num(self.limits.1),
        ]
    }
}

/// One row per (model, `d_I`, `d_S`) over the given pairs; order follows
/// `cfg.models`, then `pairs`.
pub fn r0_rows(cfg: &ScenarioConfig, pairs: &[(f64, f64)]) -> Result<Vec<R0Row>> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let coeffs = cfg.build_coefficients(&grid)?;
    let jobs: Vec<(ModelKind, f64, f64)> =
        cfg.models.iter().flat_map(|&m| pairs.iter().map(move |&(d_s, d_i)| (m, d_s, d_i))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(model, d_s, d_i)| {
            Ok(R0Row {
                model,
                d_i,
                d_s,
                r0: compute_r0(model, d_i, d_s, &coeffs, &grid)?.value,
                lambda_star: lambda_star(model, d_i, d_s, &coeffs, &grid)?.eigenvalue,
                limits: r0_limits(model, d_s, &coeffs, &grid)?,
            })
        })
        .collect::<sislab::Result<Vec<_>>>()?;
    Ok(rows)
}

/// `R0` table over every diffusivity pair of the configured run.
pub fn r0_report(cfg: &ScenarioConfig) -> Result<String> {
    let rows = r0_rows(cfg, &cfg.run.pairs())?;
    csv_string(&R0_HEADER, rows.iter().map(R0Row::cells))
}

/// `d_I` values of the overview table.
pub fn report_d_is() -> Vec<f64> {
    (-6..=3).rev().map(|k| 10f64.powi(k)).collect()
}

/// Overview: `R0` against `d_I` at the run's final `d_S`, as CSV and as
/// a Markdown table with one column per model.
pub fn overview(cfg: &ScenarioConfig) -> Result<(String, String)> {
    let d_s = cfg.run.final_pair().0;
    let pairs: Vec<(f64, f64)> = report_d_is().into_iter().map(|d_i| (d_s, d_i)).collect();
    let rows = r0_rows(cfg, &pairs)?;
    let csv = csv_string(&R0_HEADER, rows.iter().map(R0Row::cells))?;
    let mut md = format!("# Basic reproduction numbers (d_S = {d_s:e})\n\n| d_I |");
    for m in &cfg.models {
        md.push_str(&format!(" {m} |"));
    }
    md.push_str("\n|---|");
    md.push_str(&"---|".repeat(cfg.models.len()));
    md.push('\n');
    for (k, &(_, d_i)) in pairs.iter().enumerate() {
        md.push_str(&format!("| {d_i:e} |"));
        for j in 0..cfg.models.len() {
            md.push_str(&format!(" {:.6} |", rows[j * pairs.len() + k].r0));
        }
        md.push('\n');
    }
    md.push_str("| limit d_I → 0 |");
    for j in 0..cfg.models.len() {
        md.push_str(&format!(" {:.6} |", rows[j * pairs.len()].limits.0));
    }
    md.push_str("\n| limit d_I → ∞ |");
    for j in 0..cfg.models.len() {
        md.push_str(&format!(" {:.6} |", rows[j * pairs.len()].limits.1));
    }
    md.push('\n');
    Ok((csv, md))
}

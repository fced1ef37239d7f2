//! CSV helpers and profile statistics shared by every emitter.

use std::fs;
use std::path::{Path, PathBuf};

use sislab::steady::support_fraction;
use sislab::{Field, Grid};

use crate::error::Result;

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `x,S,I` rows, one per node.
pub fn profile_csv(grid: &Grid, s: &Field, i: &Field) -> Result<String> {
    let rows = (0..grid.n_nodes()).map(|k| vec![num(grid.nodes()[k]), num(s[k]), num(i[k])]);
    csv_string(&["x", "S", "I"], rows)
}

/// Extrema, `∫I` and support fraction of one steady profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStats {
    pub min_s: f64,
    pub max_s: f64,
    pub min_i: f64,
    pub max_i: f64,
    pub int_i: f64,
    pub support_frac: f64,
}

impl ProfileStats {
    pub fn of(grid: &Grid, s: &Field, i: &Field) -> Result<Self> {
        Ok(ProfileStats {
            min_s: s.min(),
            max_s: s.max(),
            min_i: i.min(),
            max_i: i.max(),
            int_i: grid.integrate(i)?,
            support_frac: support_fraction(i, grid),
        })
    }

    pub fn cells(&self) -> Vec<String> {
        [self.min_s, self.max_s, self.min_i, self.max_i, self.int_i, self.support_frac]
            .iter()
            .map(|v| num(*v))
            .collect()
    }
}

pub const STATS_HEADER: [&str; 6] = ["min_S", "max_S", "min_I", "max_I", "int_I", "support_frac"];

/// Writes `files` (name, contents) under `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

//! Pointwise reaction terms of the four SIS models.
//!
//! | kind | incidence        | recruitment / death      |
//! |------|------------------|--------------------------|
//! | MO   | `βSI`            | none (mass conserved)    |
//! | MW   | `βSI`            | `Λ - S` and `-μI`        |
//! | SO   | `βSI/(S+I)`      | none (mass conserved)    |
//! | SW   | `βSI/(S+I)`      | `Λ - S`                  |

use std::fmt;
use std::str::FromStr;

use crate::coeffs::NodeCoeffs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Mass-action incidence without birth-death.
    MO,
    /// Mass-action incidence with birth-death.
    MW,
    /// Standard incidence without birth-death.
    SO,
    /// Standard incidence with birth-death.
    SW,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::MO, ModelKind::MW, ModelKind::SO, ModelKind::SW];

    pub fn is_mass_action(self) -> bool {
        matches!(self, ModelKind::MO | ModelKind::MW)
    }

    /// MO and SO keep `∫(S + I)` constant.
    pub fn conserves_mass(self) -> bool {
        matches!(self, ModelKind::MO | ModelKind::SO)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::MO => "MO",
            ModelKind::MW => "MW",
            ModelKind::SO => "SO",
            ModelKind::SW => "SW",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MO" => Ok(ModelKind::MO),
            "MW" => Ok(ModelKind::MW),
            "SO" => Ok(ModelKind::SO),
            "SW" => Ok(ModelKind::SW),
            other => Err(Error::validation(format!("unknown model {other:?} (expected MO, MW, SO or SW)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionValue {
    pub f_s: f64,
    pub f_i: f64,
}

/// `∂(f_S, f_I)/∂(S, I)`, row-major: `[[dfs_ds, dfs_di], [dfi_ds, dfi_di]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionJacobian(pub [[f64; 2]; 2]);

fn check_state(s: f64, i: f64) -> Result<()> {
    if !(s >= 0.0 && i >= 0.0) {
        return Err(Error::validation(format!(
            "reaction evaluated at negative state (S = {s}, I = {i})"
        )));
    }
    Ok(())
}

/// Incidence rate. Standard incidence is extended by 0 at `S + I = 0`.
pub fn incidence(kind: ModelKind, beta: f64, s: f64, i: f64) -> Result<f64> {
    check_state(s, i)?;
    Ok(incidence_unchecked(kind, beta, s, i))
}

#[inline]
pub(crate) fn incidence_unchecked(kind: ModelKind, beta: f64, s: f64, i: f64) -> f64 {
    if kind.is_mass_action() {
        beta * s * i
    } else {
        let total = s + i;
        if total > 0.0 {
            beta * s * i / total
        } else {
            0.0
        }
    }
}

pub fn reaction(kind: ModelKind, c: &NodeCoeffs, s: f64, i: f64) -> Result<ReactionValue> {
    check_state(s, i)?;
    Ok(reaction_unchecked(kind, c, s, i))
}

/// Same as [`reaction`] without the sign check; used by solvers whose
/// iterates are positive by construction.
#[inline]
pub(crate) fn reaction_unchecked(kind: ModelKind, c: &NodeCoeffs, s: f64, i: f64) -> ReactionValue {
    let inc = incidence_unchecked(kind, c.beta, s, i);
    let recovery = c.gamma * i;
    match kind {
        // written so that f_s + f_i cancels exactly in floating point
        ModelKind::MO | ModelKind::SO => ReactionValue {
            f_s: recovery - inc,
            f_i: inc - recovery,
        },
        ModelKind::MW => ReactionValue {
            f_s: c.lambda - s - inc + recovery,
            f_i: inc - (c.gamma + c.mu) * i,
        },
        ModelKind::SW => ReactionValue {
            f_s: c.lambda - s - inc + recovery,
            f_i: inc - recovery,
        },
    }
}

pub fn reaction_jacobian(kind: ModelKind, c: &NodeCoeffs, s: f64, i: f64) -> Result<ReactionJacobian> {
    check_state(s, i)?;
    Ok(reaction_jacobian_unchecked(kind, c, s, i))
}

#[inline]
pub(crate) fn reaction_jacobian_unchecked(kind: ModelKind, c: &NodeCoeffs, s: f64, i: f64) -> ReactionJacobian {
    // partials of the incidence
    let (di_ds, di_di) = if kind.is_mass_action() {
        (c.beta * i, c.beta * s)
    } else {
        let total = s + i;
        if total > 0.0 {
            let t2 = total * total;
            (c.beta * i * i / t2, c.beta * s * s / t2)
        } else {
            (0.0, 0.0)
        }
    };
    let recruit = if matches!(kind, ModelKind::MW | ModelKind::SW) { -1.0 } else { 0.0 };
    let death = if kind == ModelKind::MW { c.mu } else { 0.0 };
    ReactionJacobian([
        [recruit - di_ds, c.gamma - di_di],
        [di_ds, di_di - c.gamma - death],
    ])
}

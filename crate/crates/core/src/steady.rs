//! Steady states: damped Newton for the elliptic systems, continuation in a
//! diffusivity, closed-form and semi-closed-form limiting profiles, and a
//! priori bound audits.
//!
//! Newton works in logarithmic variables `v = ln u`, so every iterate is
//! positive. Unknowns are interleaved `(S_0, I_0, S_1, I_1, …)`, which gives
//! a Jacobian with two sub- and two super-diagonals.
//!
//! For MO and SO the weighted sum of all equations vanishes identically, so
//! one equation is redundant. The last one (`I` at the right end) is replaced
//! by the constraint `∫(S + I) = N`; the dense constraint row is eliminated by
//! a Schur complement on the last unknown, which keeps the remaining block
//! banded.

use rayon::prelude::*;

use crate::coeffs::{classify_risk, CoefficientSet, MODERATE_TOL};
use crate::dynamics::{default_initial_state, run, State, StepperConfig, System};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kinetics::{reaction_jacobian_unchecked, reaction_unchecked, ModelKind};
use crate::linalg::BandMatrix;
use crate::spectral::{principal_eigenpair, solve_dfe};

/// Solutions with `max I < DFE_RATIO · max S` belong to the disease-free branch.
pub const DFE_RATIO: f64 = 1e-8;
/// Minimum number of cells a transition must span.
pub const MIN_RESOLUTION_CELLS: usize = 6;
/// Level, relative to `max I`, defining the support of `I`.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_NEWTON: usize = 100;
const MAX_BACKTRACK: usize = 40;
/// Largest change of any `ln u` in one Newton update.
const MAX_LOG_STEP: f64 = 2.0;
/// Newton steps below this (in `ln u`) are at working precision.
const STEP_TOL: f64 = 1e-11;
const ROUNDING_FACTOR: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Endemic,
    DiseaseFree,
}

#[derive(Debug, Clone)]
pub struct SteadyResult {
    pub s: Field,
    pub i: Field,
    pub residual_inf: f64,
    pub newton_iterations: usize,
    /// `N` for the conserved models.
    pub constrained_mass: Option<f64>,
    pub branch: Branch,
}

impl SteadyResult {
    pub fn is_endemic(&self) -> bool {
        self.branch == Branch::Endemic
    }
}

/// Dense linear constraint `Σ c_k u_k = target` replacing the last equation.
struct Constraint {
    weights: Vec<f64>,
    target: f64,
}

struct NewtonOutcome {
    u: Vec<f64>,
    residual_inf: f64,
    iterations: usize,
    stopped_early: bool,
}

/// Damped Newton in `v = ln u` for `F(u) = 0`.
///
/// `jacobian(u)` returns `∂F/∂u` as a band matrix with bandwidths
/// `(kl, ku)`. With a constraint, `F`'s last component is not solved for
/// (it follows from the others) but is still part of the convergence test.
/// `stop(u)` ends the iteration early when it returns true. `op_scale`
/// bounds the norm of `∂F/∂u`; it sets the rounding floor of the residual.
fn log_newton(
    u0: Vec<f64>,
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: &dyn Fn(&[f64]) -> BandMatrix,
    constraint: Option<&Constraint>,
    tol: f64,
    op_scale: f64,
    stop: &dyn Fn(&[f64]) -> bool,
    solver: &'static str,
) -> Result<NewtonOutcome> {
    let m = u0.len();
    if let Some(k) = u0.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::validation(format!("initial guess must be positive, found {} at {k}", u0[k])));
    }
    let mut v: Vec<f64> = u0.iter().map(|x| x.ln()).collect();
    let mut u = u0;
    let constraint_value = |u: &[f64]| constraint.map(|c| c.weights.iter().zip(u).map(|(w, x)| w * x).sum::<f64>() - c.target);
    let merit_vec = |f: &[f64], u: &[f64]| -> Vec<f64> {
        let mut g = f.to_vec();
        if let Some(cv) = constraint_value(u) {
            g[m - 1] = cv;
        }
        g
    };
    let converged = |f: &[f64], u: &[f64]| -> bool {
        let r = inf_norm(f);
        let c_ok = match (constraint, constraint_value(u)) {
            (Some(c), Some(cv)) => cv.abs() <= tol * c.target.abs().max(1.0),
            _ => true,
        };
        r <= tol && c_ok
    };
    // The residual cannot drop below the rounding level of the operator
    // applied to u; there, a vanishing step or a stalled line search counts
    // as convergence.
    let near_floor = |f: &[f64], u: &[f64]| -> bool {
        let floor = ROUNDING_FACTOR * f64::EPSILON * op_scale * inf_norm(u);
        let c_ok = match (constraint, constraint_value(u)) {
            (Some(c), Some(cv)) => cv.abs() <= tol * c.target.abs().max(1.0),
            _ => true,
        };
        inf_norm(f) <= tol.max(floor) && c_ok
    };

    let mut f = residual(&u);
    let mut g = merit_vec(&f, &u);
    let mut norm = l2(&g);
    for it in 0..=MAX_NEWTON {
        if !norm.is_finite() {
            return Err(Error::NoConvergence { solver, iterations: it, residual: f64::NAN });
        }
        if converged(&f, &u) {
            return Ok(NewtonOutcome { residual_inf: inf_norm(&f), u, iterations: it, stopped_early: false });
        }
        if stop(&u) {
            return Ok(NewtonOutcome { residual_inf: inf_norm(&f), u, iterations: it, stopped_early: true });
        }
        if it == MAX_NEWTON {
            break;
        }
        // Newton direction in u, mapped to v: δv = δu / u
        let jac = jacobian(&u);
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let du = match constraint {
            None => {
                let lu = jac.factorize()?;
                let mut x = rhs;
                lu.solve(&mut x);
                x
            }
            Some(c) => bordered_solve(&jac, c, &rhs)?,
        };
        let dv: Vec<f64> = du.iter().zip(&u).map(|(d, x)| d / x).collect();
        if inf_norm(&dv) <= STEP_TOL && near_floor(&f, &u) {
            return Ok(NewtonOutcome { residual_inf: inf_norm(&f), u, iterations: it, stopped_early: false });
        }
        let biggest = inf_norm(&dv);
        let mut alpha = if biggest > MAX_LOG_STEP { MAX_LOG_STEP / biggest } else { 1.0 };
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let v_new: Vec<f64> = v.iter().zip(&dv).map(|(a, d)| a + alpha * d).collect();
            let u_new: Vec<f64> = v_new.iter().map(|x| x.exp()).collect();
            if u_new.iter().all(|x| *x > 0.0 && x.is_finite()) {
                let f_new = residual(&u_new);
                let g_new = merit_vec(&f_new, &u_new);
                let n_new = l2(&g_new);
                if n_new <= (1.0 - 1e-4 * alpha) * norm || converged(&f_new, &u_new) {
                    v = v_new;
                    u = u_new;
                    f = f_new;
                    g = g_new;
                    norm = n_new;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if near_floor(&f, &u) {
                return Ok(NewtonOutcome { residual_inf: inf_norm(&f), u, iterations: it, stopped_early: false });
            }
            return Err(Error::NoConvergence { solver, iterations: it + 1, residual: inf_norm(&f) });
        }
    }
    Err(Error::NoConvergence { solver, iterations: MAX_NEWTON, residual: inf_norm(&f) })
}

const PTC_DT0: f64 = 1e-2;
const PTC_DT_MAX: f64 = 1e10;
const PTC_MAX_STEPS: usize = 400;
const PTC_GROWTH: f64 = 2.0;
const PTC_EASY_ITERATIONS: usize = 5;

/// Pseudo-transient continuation: backward Euler steps of `u' = F(u)` with
/// the step doubled after each easy solve, until it is large enough for
/// plain Newton. Backward Euler keeps `∫(S+I)` fixed, so a
/// constraint satisfied by `u0` stays satisfied.
fn pseudo_transient(
    u0: Vec<f64>,
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: &dyn Fn(&[f64]) -> BandMatrix,
    constraint: Option<&Constraint>,
    op_scale: f64,
) -> Result<Vec<f64>> {
    let m = u0.len();
    let mut u = u0;
    let mut dt = PTC_DT0;
    let never = |_: &[f64]| false;
    for _ in 0..PTC_MAX_STEPS {
        if dt >= PTC_DT_MAX {
            return Ok(u);
        }
        let prev = u.clone();
        let res = |x: &[f64]| {
            let mut f = residual(x);
            f.iter_mut().zip(x.iter().zip(&prev)).for_each(|(f, (a, b))| *f -= (a - b) / dt);
            if constraint.is_some() {
                // implied by the others and the constraint; evaluating it
                // would only amplify rounding in the mass by 1/dt
                f[m - 1] = 0.0;
            }
            f
        };
        let jac = |x: &[f64]| {
            let mut j = jacobian(x);
            (0..x.len()).for_each(|k| j.add(k, k, -1.0 / dt));
            j
        };
        let tol = 1e-8 * inf_norm(&prev);
        match log_newton(prev.clone(), &res, &jac, constraint, tol, op_scale + 1.0 / dt, &never, "pseudo-transient step") {
            Ok(out) => {
                dt *= if out.iterations <= PTC_EASY_ITERATIONS { PTC_GROWTH } else { 1.0 };
                u = out.u;
            }
            Err(_) if dt > 1e-8 => dt *= 0.25,
            Err(e) => return Err(e),
        }
    }
    Ok(u)
}

/// Solves `[A b; cᵀ d] x = r`, where the last row of `jac` is replaced by
/// the constraint weights.
fn bordered_solve(jac: &BandMatrix, c: &Constraint, r: &[f64]) -> Result<Vec<f64>> {
    let m = jac.dim();
    let last = m - 1;
    let (kl, ku) = (2, 2);
    let mut a = BandMatrix::zeros(last, kl, ku);
    for i in 0..last {
        for j in i.saturating_sub(kl)..=(i + ku).min(last - 1) {
            let v = jac.get(i, j);
            if v != 0.0 {
                a.add(i, j, v);
            }
        }
    }
    let b: Vec<f64> = (0..last).map(|i| jac.get(i, last)).collect();
    let grad = &c.weights;
    let lu = a.factorize()?;
    let mut y = r[..last].to_vec();
    lu.solve(&mut y);
    let mut z = b;
    lu.solve(&mut z);
    let dot = |p: &[f64]| grad[..last].iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    let schur = grad[last] - dot(&z);
    if schur == 0.0 || !schur.is_finite() {
        return Err(Error::Singular(last));
    }
    let x_last = (r[last] - dot(&y)) / schur;
    let mut x: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| yi - zi * x_last).collect();
    x.push(x_last);
    Ok(x)
}

/// Rough bound on the reaction Jacobian entries per unit density.
fn reaction_scale(coeffs: &CoefficientSet) -> f64 {
    1.0 + coeffs.beta.max() + coeffs.gamma.max() + coeffs.mu.max()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residual of the steady system at interleaved `u`.
fn steady_residual(kind: ModelKind, d_s: f64, d_i: f64, coeffs: &CoefficientSet, grid: &Grid, u: &[f64]) -> Vec<f64> {
    let n = grid.n_nodes();
    let lap = grid.laplacian();
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let (l, d, up) = lap.row(k);
        let (sl, il) = if k > 0 { (u[2 * k - 2], u[2 * k - 1]) } else { (0.0, 0.0) };
        let (sr, ir) = if k + 1 < n { (u[2 * k + 2], u[2 * k + 3]) } else { (0.0, 0.0) };
        let (s, i) = (u[2 * k], u[2 * k + 1]);
        let r = reaction_unchecked(kind, &coeffs.at(k), s, i);
        out[2 * k] = d_s * (l * sl + d * s + up * sr) + r.f_s;
        out[2 * k + 1] = d_i * (l * il + d * i + up * ir) + r.f_i;
    }
    out
}

fn steady_jacobian(kind: ModelKind, d_s: f64, d_i: f64, coeffs: &CoefficientSet, grid: &Grid, u: &[f64]) -> BandMatrix {
    let n = grid.n_nodes();
    let lap = grid.laplacian();
    let mut jac = BandMatrix::zeros(2 * n, 2, 2);
    for k in 0..n {
        let (l, d, up) = lap.row(k);
        let j = reaction_jacobian_unchecked(kind, &coeffs.at(k), u[2 * k], u[2 * k + 1]).0;
        let (rs, ri) = (2 * k, 2 * k + 1);
        jac.add(rs, rs, d_s * d + j[0][0]);
        jac.add(rs, ri, j[0][1]);
        jac.add(ri, rs, j[1][0]);
        jac.add(ri, ri, d_i * d + j[1][1]);
        if k > 0 {
            jac.add(rs, rs - 2, d_s * l);
            jac.add(ri, ri - 2, d_i * l);
        }
        if k + 1 < n {
            jac.add(rs, rs + 2, d_s * up);
            jac.add(ri, ri + 2, d_i * up);
        }
    }
    jac
}

fn interleave(s: &[f64], i: &[f64]) -> Vec<f64> {
    s.iter().zip(i).flat_map(|(a, b)| [*a, *b]).collect()
}

fn split(grid: &Grid, u: &[f64]) -> Result<(Field, Field)> {
    let s = u.iter().step_by(2).copied().collect();
    let i = u.iter().skip(1).step_by(2).copied().collect();
    Ok((grid.field(s)?, grid.field(i)?))
}

fn check_diffusivities(d_s: f64, d_i: f64) -> Result<()> {
    for (name, d) in [("d_S", d_s), ("d_I", d_i)] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::validation(format!("{name} must be positive, got {d}")));
        }
    }
    Ok(())
}

/// Disease-free equilibrium of a model: `(S̃, 0)`, or `(N/|Ω|, 0)` for MO/SO.
pub fn disease_free_state(kind: ModelKind, d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<(Field, Field)> {
    let s = if kind.conserves_mass() {
        grid.constant(coeffs.total_mass()? / grid.length())
    } else {
        solve_dfe(d_s, coeffs, grid)?
    };
    Ok((s, grid.constant(0.0)))
}

/// Positive steady state from `init` by damped Newton.
///
/// An iteration that drives `max I` below `DFE_RATIO · max S` is reported as
/// [`Branch::DiseaseFree`] with the exact disease-free equilibrium.
pub fn newton_steady(
    kind: ModelKind,
    d_s: f64,
    d_i: f64,
    coeffs: &CoefficientSet,
    grid: &Grid,
    init: &State,
    tol: f64,
) -> Result<SteadyResult> {
    check_diffusivities(d_s, d_i)?;
    if !(tol > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    grid.check(&init.s)?;
    grid.check(&init.i)?;
    let constraint = if kind.conserves_mass() {
        let n_total = coeffs.total_mass()?;
        let w = grid.weights();
        Some(Constraint {
            weights: w.iter().flat_map(|x| [*x, *x]).collect(),
            target: n_total,
        })
    } else {
        None
    };
    let mut u0 = interleave(init.s.values(), init.i.values());
    // a zero component cannot be represented in log variables
    let floor = 1e-8 * inf_norm(&u0).max(1e-300);
    u0.iter_mut().for_each(|x| *x = x.max(floor));
    if let Some(c) = &constraint {
        let mass: f64 = c.weights.iter().zip(&u0).map(|(w, x)| w * x).sum();
        u0.iter_mut().for_each(|x| *x *= c.target / mass);
    }

    let res = |u: &[f64]| steady_residual(kind, d_s, d_i, coeffs, grid, u);
    let jac = |u: &[f64]| steady_jacobian(kind, d_s, d_i, coeffs, grid, u);
    let stop = |u: &[f64]| {
        let max_s = u.iter().step_by(2).fold(0.0f64, |a, b| a.max(*b));
        let max_i = u.iter().skip(1).step_by(2).fold(0.0f64, |a, b| a.max(*b));
        max_i < 1e-4 * DFE_RATIO * max_s
    };
    let op_scale = 4.0 * d_s.max(d_i) / (grid.h() * grid.h()) + reaction_scale(coeffs);
    let direct = log_newton(u0.clone(), &res, &jac, constraint.as_ref(), tol, op_scale, &stop, "steady Newton");
    let on_dfe = |o: &NewtonOutcome| {
        o.stopped_early || {
            let max_s = o.u.iter().step_by(2).fold(0.0f64, |a, b| a.max(*b));
            let max_i = o.u.iter().skip(1).step_by(2).fold(0.0f64, |a, b| a.max(*b));
            max_i < DFE_RATIO * max_s
        }
    };
    let out = match direct {
        Ok(out) if !on_dfe(&out) => out,
        // far from the solution, or pulled onto the disease-free branch:
        // follow the time-dependent problem with growing implicit steps
        _ => {
            let u1 = pseudo_transient(u0, &res, &jac, constraint.as_ref(), op_scale)?;
            log_newton(u1, &res, &jac, constraint.as_ref(), tol, op_scale, &stop, "steady Newton")?
        }
    };
    let (s, i) = split(grid, &out.u)?;
    let constrained_mass = constraint.as_ref().map(|c| c.target);
    if out.stopped_early || i.max() < DFE_RATIO * s.max() {
        let (s, i) = disease_free_state(kind, d_s, coeffs, grid)?;
        let residual_inf = inf_norm(&res(&interleave(s.values(), i.values())));
        return Ok(SteadyResult {
            s,
            i,
            residual_inf,
            newton_iterations: out.iterations,
            constrained_mass,
            branch: Branch::DiseaseFree,
        });
    }
    Ok(SteadyResult {
        s,
        i,
        residual_inf: out.residual_inf,
        newton_iterations: out.iterations,
        constrained_mass,
        branch: Branch::Endemic,
    })
}

/// Which diffusivity the continuation drives to zero, and what is held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepTarget {
    /// `d_S` follows the schedule, `d_I` fixed.
    DsToZero { d_i: f64 },
    /// `d_I` follows the schedule, `d_S` fixed.
    DiToZero { d_s: f64 },
    /// `d_S` follows the schedule and `d_I = ratio · d_S`.
    Both { ratio: f64 },
}

impl SweepTarget {
    /// `(d_S, d_I)` at schedule value `x`.
    pub fn diffusivities(self, x: f64) -> (f64, f64) {
        match self {
            SweepTarget::DsToZero { d_i } => (x, d_i),
            SweepTarget::DiToZero { d_s } => (d_s, x),
            SweepTarget::Both { ratio } => (x, ratio * x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepTarget::DsToZero { .. } => "d_S_to_zero",
            SweepTarget::DiToZero { .. } => "d_I_to_zero",
            SweepTarget::Both { .. } => "both",
        }
    }

    pub fn ratio(self) -> Option<f64> {
        match self {
            SweepTarget::Both { ratio } => Some(ratio),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub diffusivity: f64,
    pub d_s: f64,
    pub d_i: f64,
    pub result: SteadyResult,
}

#[derive(Debug)]
pub struct SweepFailure {
    pub diffusivity: f64,
    pub error: Error,
}

#[derive(Debug)]
pub struct SweepResult {
    pub kind: ModelKind,
    pub target: SweepTarget,
    pub entries: Vec<SweepEntry>,
    /// Set when an entry failed; `entries` then holds the completed prefix.
    pub failure: Option<SweepFailure>,
}

impl SweepResult {
    pub fn into_result(self) -> Result<SweepResult> {
        match self.failure {
            Some(f) => Err(f.error),
            None => Ok(self),
        }
    }
}

/// Cells spanned by the steepest transition of `u` if it were linear:
/// `(max - min) / max |Δu|`. Infinite for a constant field.
pub fn transition_cells(u: &Field) -> f64 {
    let v = u.values();
    let jump = v.windows(2).fold(0.0f64, |a, w| a.max((w[1] - w[0]).abs()));
    if jump == 0.0 {
        return f64::INFINITY;
    }
    (u.max() - u.min()) / jump
}

/// Rejects profiles whose steepest transition spans fewer than
/// [`MIN_RESOLUTION_CELLS`] cells.
pub fn check_resolution(result: &SteadyResult, grid: &Grid) -> Result<()> {
    let cells = transition_cells(&result.s).min(transition_cells(&result.i));
    if cells < MIN_RESOLUTION_CELLS as f64 {
        let factor = MIN_RESOLUTION_CELLS as f64 / cells;
        let suggested = ((grid.n_cells() as f64 * factor / 100.0).ceil() * 100.0) as usize;
        return Err(Error::UnderResolved {
            cells,
            required: MIN_RESOLUTION_CELLS,
            suggested,
        });
    }
    Ok(())
}

/// Configuration of the dynamics run that seeds the first sweep entry.
pub fn seed_config() -> StepperConfig {
    StepperConfig {
        dt_initial: 1e-2,
        steady_tol: 1e-6,
        t_max: 500.0,
        trace_stride: 1000,
        ..StepperConfig::default()
    }
}

/// Steady state at `(d_S, d_I)` seeded by a dynamics run from the default
/// initial data.
pub fn steady_from_dynamics(kind: ModelKind, d_s: f64, d_i: f64, coeffs: &CoefficientSet, grid: &Grid, tol: f64) -> Result<SteadyResult> {
    let sys = System::new(kind, grid, coeffs, d_s, d_i)?;
    let seed = run(default_initial_state(kind, coeffs, grid, d_s)?, &sys, &seed_config())?;
    newton_steady(kind, d_s, d_i, coeffs, grid, &seed.state, tol)
}

/// Maximum number of times a continuation step may be halved (in log scale).
const MAX_SUBDIVISIONS: usize = 12;

/// Continuation along a decreasing schedule. The first entry is seeded by a
/// dynamics run; each later entry starts from the previous one, with the
/// step subdivided geometrically when Newton fails.
pub fn sweep(kind: ModelKind, target: SweepTarget, coeffs: &CoefficientSet, grid: &Grid, schedule: &[f64], tol: f64) -> Result<SweepResult> {
    if schedule.is_empty() {
        return Err(Error::validation("empty schedule"));
    }
    if schedule.iter().any(|x| !(*x > 0.0 && x.is_finite())) || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("schedule must be positive and strictly decreasing"));
    }
    match target {
        SweepTarget::DsToZero { d_i: d } | SweepTarget::DiToZero { d_s: d } | SweepTarget::Both { ratio: d } => {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::validation(format!("fixed diffusivity or ratio must be positive, got {d}")));
            }
        }
    }
    let mut out = SweepResult { kind, target, entries: Vec::new(), failure: None };
    let mut prev: Option<(f64, SteadyResult)> = None;
    for &x in schedule {
        let attempt = match &prev {
            None => {
                let (d_s, d_i) = target.diffusivities(x);
                steady_from_dynamics(kind, d_s, d_i, coeffs, grid, tol)
            }
            Some((x_prev, r)) => continue_to(kind, target, coeffs, grid, *x_prev, r, x, tol),
        };
        let attempt = attempt.and_then(|r| check_resolution(&r, grid).map(|_| r));
        match attempt {
            Ok(r) => {
                let (d_s, d_i) = target.diffusivities(x);
                out.entries.push(SweepEntry { diffusivity: x, d_s, d_i, result: r.clone() });
                prev = Some((x, r));
            }
            Err(error) => {
                out.failure = Some(SweepFailure { diffusivity: x, error });
                break;
            }
        }
    }
    Ok(out)
}

/// Runs one sweep per model concurrently; results follow the order of `kinds`.
pub fn sweep_models(kinds: &[ModelKind], target: SweepTarget, coeffs: &CoefficientSet, grid: &Grid, schedule: &[f64], tol: f64) -> Vec<Result<SweepResult>> {
    kinds.par_iter().map(|&k| sweep(k, target, coeffs, grid, schedule, tol)).collect()
}

#[allow(clippy::too_many_arguments)]
fn continue_to(
    kind: ModelKind,
    target: SweepTarget,
    coeffs: &CoefficientSet,
    grid: &Grid,
    x_from: f64,
    from: &SteadyResult,
    x_to: f64,
    tol: f64,
) -> Result<SteadyResult> {
    let mut x_cur = x_from;
    let mut cur = from.clone();
    let mut step = (x_to / x_from).ln();
    let mut halvings = 0;
    loop {
        let remaining = (x_to / x_cur).ln();
        let x_next = if step.abs() >= remaining.abs() { x_to } else { x_cur * step.exp() };
        let (d_s, d_i) = target.diffusivities(x_next);
        let init = State { s: cur.s.clone(), i: cur.i.clone(), t: 0.0 };
        match newton_steady(kind, d_s, d_i, coeffs, grid, &init, tol) {
            Ok(r) => {
                if x_next == x_to {
                    return Ok(r);
                }
                x_cur = x_next;
                cur = r;
            }
            Err(e) => {
                if halvings == MAX_SUBDIVISIONS || e.is_validation() {
                    return Err(e);
                }
                halvings += 1;
                step *= 0.5;
            }
        }
    }
}

/// Which closed form or reduced problem produced a [`LimitProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitFormula {
    /// `d_S → 0` limit of MW: `S = (Λ + γI)/(1 + βI)` with `I` solving the
    /// reduced scalar problem.
    MwSusceptibleToZero { d_i: f64 },
    /// Joint limit of MO with `d_I/d_S → d`.
    MoJoint { d: f64 },
    /// `d_I → 0` limit of SO with `d_I/d_S → d0` (`f64::INFINITY` allowed).
    SoInfectedToZero { d0: f64 },
}

impl LimitFormula {
    pub fn label(&self) -> String {
        match self {
            LimitFormula::MwSusceptibleToZero { d_i } => format!("mw_ds0(d_I={d_i})"),
            LimitFormula::MoJoint { d } => format!("mo_joint(d={d})"),
            LimitFormula::SoInfectedToZero { d0 } => format!("so_di0(d0={d0})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LimitProfile {
    pub s: Field,
    pub i: Field,
    pub formula: LimitFormula,
    /// `∫I` of the limit (the bisection root for the joint MO limit).
    pub total_i: f64,
}

/// `S = (Λ + γI)/(1 + βI)` nodally.
pub fn mw_limit_susceptible(coeffs: &CoefficientSet, i: &Field) -> Result<Field> {
    let n = coeffs.n_nodes();
    let v = (0..n)
        .map(|k| {
            let c = coeffs.at(k);
            (c.lambda + c.gamma * i[k]) / (1.0 + c.beta * i[k])
        })
        .collect();
    Ok(Field::from_raw(i.shape(), v))
}

/// Limit of MW as `d_S → 0` at fixed `d_I`: solves
/// `-d_I ΔI = [β(Λ + γI)/(1 + βI) - γ - μ] I` for positive `I`, then applies
/// the susceptible formula. Requires the principal eigenvalue of
/// `d_I Δ + βΛ - γ - μ` to be negative.
pub fn mw_limit_ds0(d_i: f64, coeffs: &CoefficientSet, grid: &Grid, init: Option<&Field>, tol: f64) -> Result<LimitProfile> {
    let potential = grid.field(
        (0..grid.n_nodes())
            .map(|k| {
                let c = coeffs.at(k);
                c.beta * c.lambda - c.gamma - c.mu
            })
            .collect(),
    )?;
    let eig = principal_eigenpair(d_i, &potential, grid)?;
    if eig.eigenvalue >= 0.0 {
        return Err(Error::Hypothesis(format!(
            "principal eigenvalue for the potential βΛ - γ - μ is {:.6e} >= 0; the limit needs it negative",
            eig.eigenvalue
        )));
    }
    let u0: Vec<f64> = match init {
        Some(f) => {
            grid.check(f)?;
            f.values().to_vec()
        }
        None => eig.eigenfunction.values().to_vec(),
    };
    let n = grid.n_nodes();
    let lap = grid.laplacian();
    let g = |k: usize, i: f64| {
        let c = coeffs.at(k);
        c.beta * (c.lambda + c.gamma * i) / (1.0 + c.beta * i) - c.gamma - c.mu
    };
    let res = |u: &[f64]| -> Vec<f64> {
        let mut lu = vec![0.0; n];
        lap.apply_slice(u, &mut lu);
        (0..n).map(|k| d_i * lu[k] + g(k, u[k]) * u[k]).collect()
    };
    let jac = |u: &[f64]| -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 1, 1);
        for k in 0..n {
            let c = coeffs.at(k);
            let (l, d, up) = lap.row(k);
            let dg = c.beta * (c.gamma - c.beta * c.lambda) / ((1.0 + c.beta * u[k]).powi(2));
            m.add(k, k, d_i * d + g(k, u[k]) + u[k] * dg);
            if k > 0 {
                m.add(k, k - 1, d_i * l);
            }
            if k + 1 < n {
                m.add(k, k + 1, d_i * up);
            }
        }
        m
    };
    let stop = |u: &[f64]| inf_norm(u) < 1e-12;
    let op_scale = 4.0 * d_i / (grid.h() * grid.h()) + reaction_scale(coeffs);
    let out = log_newton(u0, &res, &jac, None, tol, op_scale, &stop, "limit Newton (d_S -> 0)")?;
    if out.stopped_early {
        return Err(Error::NoConvergence {
            solver: "limit Newton (d_S -> 0): collapsed to I = 0",
            iterations: out.iterations,
            residual: out.residual_inf,
        });
    }
    let i = grid.field(out.u)?;
    let s = mw_limit_susceptible(coeffs, &i)?;
    let total_i = grid.integrate(&i)?;
    Ok(LimitProfile { s, i, formula: LimitFormula::MwSusceptibleToZero { d_i }, total_i })
}

/// Root tolerance for the joint MO limit.
const WU_ZOU_TOL: f64 = 1e-12;

/// `I(x; m) = {(N/|Ω|)β - γ - ((1-d)β/|Ω|) m}₊ / (dβ)`.
fn wu_zou_profile(coeffs: &CoefficientSet, grid: &Grid, n_total: f64, d: f64, m: f64) -> Vec<f64> {
    let len = grid.length();
    (0..coeffs.n_nodes())
        .map(|k| {
            let (b, g) = (coeffs.beta[k], coeffs.gamma[k]);
            (n_total / len * b - g - (1.0 - d) * b / len * m).max(0.0) / (d * b)
        })
        .collect()
}

/// Joint limit of MO as `d_I → 0` with `d_I/d_S → d`. The total
/// `m = ∫I` solves `∫I(·; m) = m` and is found by bisection on `[0, N]`.
pub fn mo_limit_wu_zou(d: f64, coeffs: &CoefficientSet, grid: &Grid, n_total: f64) -> Result<LimitProfile> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::validation(format!("d must be positive and finite, got {d}")));
    }
    if !(n_total > 0.0 && n_total.is_finite()) {
        return Err(Error::validation(format!("N must be positive, got {n_total}")));
    }
    let len = grid.length();
    if !(0..coeffs.n_nodes()).any(|k| n_total / len * coeffs.beta[k] - coeffs.gamma[k] > 0.0) {
        return Err(Error::Hypothesis(format!(
            "the set where (N/|Ω|)β > γ is empty for N = {n_total}; no positive limit"
        )));
    }
    let gap = |m: f64| grid.integrate_slice(&wu_zou_profile(coeffs, grid, n_total, d, m)) - m;
    let (mut lo, mut hi) = (0.0, n_total);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if !(g_lo > 0.0 && g_hi <= 0.0) {
        return Err(Error::NoConvergence {
            solver: "joint-limit bisection (no sign change on [0, N])",
            iterations: 0,
            residual: g_lo.min(g_hi.abs()),
        });
    }
    let mut iterations = 0;
    while hi - lo > WU_ZOU_TOL * n_total.max(1.0) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let m = 0.5 * (lo + hi);
    let i = wu_zou_profile(coeffs, grid, n_total, d, m);
    let s: Vec<f64> = i.iter().map(|ik| n_total / len - (1.0 - d) / len * m - d * ik).collect();
    Ok(LimitProfile {
        s: grid.field(s)?,
        i: grid.field(i)?,
        formula: LimitFormula::MoJoint { d },
        total_i: m,
    })
}

/// Limit of SO as `d_I → 0` with `d_I/d_S → d0 ∈ [0, ∞]`, by direct nodal
/// evaluation. Moderate nodes (`β = γ` within tolerance) count with the
/// low-risk set. Needs high-risk nodes; for `d0 = ∞` also needs nodes that
/// are not high risk.
pub fn so_limit_peng(d0: f64, coeffs: &CoefficientSet, grid: &Grid, n_total: f64) -> Result<LimitProfile> {
    if !(d0 >= 0.0) {
        return Err(Error::validation(format!("d0 must be nonnegative, got {d0}")));
    }
    if !(n_total > 0.0 && n_total.is_finite()) {
        return Err(Error::validation(format!("N must be positive, got {n_total}")));
    }
    let risk = classify_risk(coeffs, MODERATE_TOL);
    if risk.high_risk.is_empty() {
        return Err(Error::Hypothesis("no high-risk sites (β > γ): the limit is the disease-free state".into()));
    }
    let n = coeffs.n_nodes();
    let excess = |k: usize| if risk.is_high(k) { coeffs.beta[k] - coeffs.gamma[k] } else { 0.0 };
    let (s, i): (Vec<f64>, Vec<f64>) = if d0 == 0.0 {
        let ratio: Vec<f64> = (0..n).map(|k| excess(k) / coeffs.gamma[k]).collect();
        let denom = grid.integrate_slice(&ratio.iter().map(|r| 1.0 + r).collect::<Vec<_>>());
        let s = vec![n_total / denom; n];
        let i = ratio.iter().map(|r| n_total * r / denom).collect();
        (s, i)
    } else if d0.is_finite() {
        let a: Vec<f64> = (0..n)
            .map(|k| {
                let e = excess(k);
                if e > 0.0 {
                    d0 * e / (d0 * e + coeffs.gamma[k])
                } else {
                    0.0
                }
            })
            .collect();
        let denom = grid.integrate_slice(&a.iter().map(|ak| ak + d0 * (1.0 - ak)).collect::<Vec<_>>());
        let s = a.iter().map(|ak| n_total * d0 * (1.0 - ak) / denom).collect();
        let i = a.iter().map(|ak| n_total * ak / denom).collect();
        (s, i)
    } else {
        if risk.high_risk.len() == n {
            return Err(Error::Hypothesis("no low-risk sites (β < γ): the d0 = ∞ limit is undefined".into()));
        }
        let one_minus_a: Vec<f64> = (0..n).map(|k| if risk.is_high(k) { 0.0 } else { 1.0 }).collect();
        let denom = grid.integrate_slice(&one_minus_a);
        (one_minus_a.iter().map(|v| n_total * v / denom).collect(), vec![0.0; n])
    };
    let i = grid.field(i)?;
    let total_i = grid.integrate(&i)?;
    Ok(LimitProfile {
        s: grid.field(s)?,
        i,
        formula: LimitFormula::SoInfectedToZero { d0 },
        total_i,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Quantity compared (left side).
    pub value: f64,
    /// Bound it is compared with (right side, including slack).
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub checks: Vec<Check>,
}

impl AprioriReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Default discretization slack for [`audit_apriori`], relative to the
/// density scale.
pub const APRIORI_SLACK: f64 = 1e-6;

/// A priori bounds for an MW steady state:
/// `max_S` ≤ `max{Λ*, max γ/β}`, `min_S` ≥ `min{Λ_*, min γ/β}`,
/// `∫S + ∫μI = ∫Λ` (relative 1e-8) and `β_* ∫SI ≤ (γ* + μ*) ∫I`.
pub fn audit_apriori(s: &Field, i: &Field, coeffs: &CoefficientSet, grid: &Grid, slack: f64) -> Result<AprioriReport> {
    grid.check(s)?;
    grid.check(i)?;
    let ratio = coeffs.gamma.zip_map(&coeffs.beta, |g, b| g / b)?;
    let upper = coeffs.lambda.max().max(ratio.max());
    let lower = coeffs.lambda.min().min(ratio.min());
    let eps = slack * upper;
    let int_lambda = grid.integrate(&coeffs.lambda)?;
    let balance = grid.integrate(s)? + grid.inner(&coeffs.mu, i)?;
    let si = grid.inner(s, i)?;
    let int_i = grid.integrate(i)?;
    let lhs4 = coeffs.beta.min() * si;
    let rhs4 = (coeffs.gamma.max() + coeffs.mu.max()) * int_i + eps;
    let checks = vec![
        Check { name: "max_S", passed: s.max() <= upper + eps, value: s.max(), bound: upper + eps },
        Check { name: "min_S", passed: s.min() >= lower - eps, value: s.min(), bound: lower - eps },
        Check {
            name: "mass_balance",
            passed: (balance - int_lambda).abs() <= 1e-8 * int_lambda,
            value: balance,
            bound: int_lambda,
        },
        Check { name: "incidence", passed: lhs4 <= rhs4, value: lhs4, bound: rhs4 },
    ];
    Ok(AprioriReport { checks })
}

/// Diagnostics of an MW sweep with `d_I → 0` at fixed `d_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Di0Report {
    /// `min{Λ_*, min γ/β}`.
    pub s_lower_bound: f64,
    pub min_s: Vec<f64>,
    pub int_i: Vec<f64>,
    /// `|∫I_{k+1} - ∫I_k| / ∫I_{k+1}`.
    pub int_i_relative_change: Vec<f64>,
    /// Fraction of `Ω` where `I > SUPPORT_THRESHOLD · max I`.
    pub support_fraction: Vec<f64>,
    /// `max S - min S`.
    pub s_flatness: Vec<f64>,
}

pub fn di0_diagnostics(sweep: &SweepResult, coeffs: &CoefficientSet, grid: &Grid) -> Result<Di0Report> {
    let d_s = match sweep.target {
        SweepTarget::DiToZero { d_s } => d_s,
        _ => return Err(Error::validation("d_I -> 0 diagnostics need a sweep with d_I as the schedule")),
    };
    if sweep.kind != ModelKind::MW {
        return Err(Error::validation("d_I -> 0 diagnostics apply to MW sweeps"));
    }
    let s_tilde = solve_dfe(d_s, coeffs, grid)?;
    let margin = (0..grid.n_nodes())
        .map(|k| coeffs.beta[k] * s_tilde[k] - coeffs.gamma[k] - coeffs.mu[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if margin <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "βS̃ > γ + μ nowhere: min(γ + μ - βS̃) = {:.6e}",
            -margin
        )));
    }
    let ratio = coeffs.gamma.zip_map(&coeffs.beta, |g, b| g / b)?;
    let s_lower_bound = coeffs.lambda.min().min(ratio.min());
    let mut report = Di0Report {
        s_lower_bound,
        min_s: Vec::new(),
        int_i: Vec::new(),
        int_i_relative_change: Vec::new(),
        support_fraction: Vec::new(),
        s_flatness: Vec::new(),
    };
    for e in &sweep.entries {
        let r = &e.result;
        report.min_s.push(r.s.min());
        report.int_i.push(grid.integrate(&r.i)?);
        report.support_fraction.push(support_fraction(&r.i, grid));
        report.s_flatness.push(r.s.max() - r.s.min());
    }
    report.int_i_relative_change = report.int_i.windows(2).map(|w| (w[1] - w[0]).abs() / w[1]).collect();
    Ok(report)
}

/// Measure of `{I > SUPPORT_THRESHOLD · max I}` divided by `|Ω|`.
pub fn support_fraction(i: &Field, grid: &Grid) -> f64 {
    let level = SUPPORT_THRESHOLD * i.max();
    if i.max() <= 0.0 {
        return 0.0;
    }
    // the weights sum to |Ω| only up to rounding
    (grid.measure_where(i, |v| v > level) / grid.length()).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{preset_fig0a, preset_homogeneous, preset_moderate};
    use crate::dynamics::Scheme;

    fn state(g: &Grid, s: f64, i: f64) -> State {
        State::new(g.constant(s), g.constant(i), 0.0).unwrap()
    }

    #[test]
    fn homogeneous_endemic_and_dfe() {
        let g = Grid::unit(40).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let init = State::new(g.sample(|x| 1.8 + 0.3 * x), g.sample(|x| 1.2 - 0.3 * x), 0.0).unwrap();
        let r = newton_steady(ModelKind::MW, 1.0, 1.0, &c, &g, &init, 1e-12).unwrap();
        assert!(r.is_endemic());
        assert!(r.s.dist_inf(&g.constant(2.0)).unwrap() <= 1e-12);
        assert!(r.i.dist_inf(&g.constant(1.0)).unwrap() <= 1e-12);

        let c = preset_homogeneous(&g, 3.0, 0.5, 1.0, 1.0).unwrap();
        for init in [state(&g, 1.0, 1.0), state(&g, 3.0, 0.01), state(&g, 0.5, 4.0)] {
            let r = newton_steady(ModelKind::MW, 1.0, 1.0, &c, &g, &init, 1e-10).unwrap();
            assert_eq!(r.branch, Branch::DiseaseFree);
            assert!(r.s.dist_inf(&g.constant(3.0)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid::unit(8).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let u: Vec<f64> = (0..18).map(|k| 0.5 + 0.1 * ((k * 7) % 5) as f64).collect();
        for kind in ModelKind::ALL {
            let jac = steady_jacobian(kind, 0.3, 0.07, &c, &g, &u);
            for j in 0..u.len() {
                let h = 1e-6;
                let mut up = u.clone();
                up[j] += h;
                let mut um = u.clone();
                um[j] -= h;
                let fp = steady_residual(kind, 0.3, 0.07, &c, &g, &up);
                let fm = steady_residual(kind, 0.3, 0.07, &c, &g, &um);
                for i in 0..u.len() {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert!((jac.get(i, j) - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{kind} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn conserved_models_respect_mass() {
        let g = Grid::unit(100).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for kind in [ModelKind::SO, ModelKind::MO] {
            let r = steady_from_dynamics(kind, 1.0, 1.0, &c, &g, 1e-10).unwrap();
            let mass = g.integrate(&r.s).unwrap() + g.integrate(&r.i).unwrap();
            assert!((mass - 1.0).abs() <= 1e-10, "{kind}: {mass}");
            if kind == ModelKind::SO {
                assert!(r.is_endemic() && r.i.min() > 0.0);
            }
            assert!(r.residual_inf <= 1e-10);
        }
    }

    /// Dynamics run to a tight steady tolerance: the independent oracle.
    fn dynamics_oracle(kind: ModelKind, c: &CoefficientSet, g: &Grid, d_s: f64, d_i: f64) -> State {
        let sys = System::new(kind, g, c, d_s, d_i).unwrap();
        let cfg = StepperConfig {
            dt_initial: 0.05,
            steady_tol: 1e-11,
            t_max: 1e4,
            scheme: Scheme::ImexEuler,
            ..StepperConfig::default()
        };
        run(default_initial_state(kind, c, g, d_s).unwrap(), &sys, &cfg).unwrap().state
    }

    #[test]
    fn newton_agrees_with_dynamics() {
        let g = Grid::unit(60).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for kind in [ModelKind::MW, ModelKind::SO, ModelKind::SW] {
            let oracle = dynamics_oracle(kind, &c, &g, 0.5, 0.2);
            let r = newton_steady(kind, 0.5, 0.2, &c, &g, &oracle, 1e-11).unwrap();
            let d = r.s.dist_inf(&oracle.s).unwrap().max(r.i.dist_inf(&oracle.i).unwrap());
            assert!(d <= 1e-6, "{kind}: {d}");
        }
    }

    #[test]
    fn sweep_mw_ds_to_zero_stays_positive() {
        let g = Grid::unit(200).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let schedule = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
        let s = sweep(ModelKind::MW, SweepTarget::DsToZero { d_i: 1.0 }, &c, &g, &schedule, 1e-10)
            .unwrap()
            .into_result()
            .unwrap();
        assert_eq!(s.entries.len(), 5);
        let min_i: Vec<f64> = s.entries.iter().map(|e| e.result.i.min()).collect();
        assert!(min_i.iter().all(|&m| m > 0.1), "{min_i:?}");
        for e in &s.entries {
            assert!(audit_apriori(&e.result.s, &e.result.i, &c, &g, APRIORI_SLACK).unwrap().passed());
        }
    }

    #[test]
    fn sweep_rejects_bad_schedule() {
        let g = Grid::unit(20).unwrap();
        let c = preset_fig0a(&g).unwrap();
        assert!(sweep(ModelKind::MW, SweepTarget::DsToZero { d_i: 1.0 }, &c, &g, &[1.0, 1.0], 1e-10).is_err());
        assert!(sweep(ModelKind::MW, SweepTarget::DsToZero { d_i: 1.0 }, &c, &g, &[], 1e-10).is_err());
    }

    #[test]
    fn resolution_guard() {
        let g = Grid::unit(20).unwrap();
        let step = g.sample(|x| if x < 0.5 { 1.0 } else { 2.0 });
        let r = SteadyResult {
            s: g.constant(1.0),
            i: step,
            residual_inf: 0.0,
            newton_iterations: 0,
            constrained_mass: None,
            branch: Branch::Endemic,
        };
        match check_resolution(&r, &g).unwrap_err() {
            Error::UnderResolved { cells, suggested, .. } => {
                assert_eq!(cells, 1.0);
                assert!(suggested >= 120);
            }
            e => panic!("{e}"),
        }
        assert_eq!(transition_cells(&g.constant(2.0)), f64::INFINITY);
        assert!((transition_cells(&g.sample(|x| x)) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn mw_limit_homogeneous() {
        let g = Grid::unit(30).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let lp = mw_limit_ds0(1.0, &c, &g, None, 1e-12).unwrap();
        assert!(lp.i.dist_inf(&g.constant(1.0)).unwrap() < 1e-10);
        assert!(lp.s.dist_inf(&g.constant(2.0)).unwrap() < 1e-10);
        let s0 = mw_limit_susceptible(&c, &g.constant(0.0)).unwrap();
        assert_eq!(s0, c.lambda);
        let low = preset_homogeneous(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(mw_limit_ds0(1.0, &low, &g, None, 1e-12), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn wu_zou_closed_form_and_supports() {
        let g = Grid::unit(400).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let lp = mo_limit_wu_zou(1.0, &c, &g, 3.0).unwrap();
        let closed = g.sample(|x| {
            let b = 1.5 + (2.0 * std::f64::consts::PI * x).sin();
            let gm = 1.2 + (2.0 * std::f64::consts::PI * x).cos();
            (3.0 - gm / b).max(0.0)
        });
        assert!(lp.i.dist_inf(&closed).unwrap() <= 1e-12);
        assert!(lp.s.dist_inf(&closed.map(|v| 3.0 - v)).unwrap() <= 1e-12);

        let omega_plus: Vec<bool> = (0..g.n_nodes()).map(|k| 3.0 * c.beta[k] - c.gamma[k] > 0.0).collect();
        let support = |d: f64| -> Vec<bool> {
            mo_limit_wu_zou(d, &c, &g, 3.0).unwrap().i.values().iter().map(|&v| v > 0.0).collect()
        };
        let small = support(0.5);
        let large = support(2.0);
        assert!(small.iter().zip(&omega_plus).all(|(a, b)| !a || *b));
        assert!(small != omega_plus);
        assert!(omega_plus.iter().zip(&large).all(|(a, b)| !a || *b));

        // self-consistency of the scalar equation and the root
        for d in [0.5, 2.0] {
            let lp = mo_limit_wu_zou(d, &c, &g, 1.0).unwrap();
            assert!((g.integrate(&lp.i).unwrap() - lp.total_i).abs() <= 1e-12);
            for k in 0..g.n_nodes() {
                let (b, gm) = (c.beta[k], c.gamma[k]);
                let lhs = (b - gm - (1.0 - d) * b * lp.total_i).max(0.0) - d * b * lp.i[k];
                assert!(lhs.abs() <= 1e-10);
            }
        }
        let h = preset_homogeneous(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(mo_limit_wu_zou(1.0, &h, &g, 1.0).is_err());
    }

    #[test]
    fn peng_formulas() {
        let g = Grid::unit(100).unwrap();
        let h = preset_homogeneous(&g, 1.0, 2.0, 0.5, 1.0).unwrap();
        let lp = so_limit_peng(0.0, &h, &g, 1.0).unwrap();
        assert!(lp.s.dist_inf(&g.constant(0.5 / 2.0)).unwrap() < 1e-14);
        assert!(lp.i.dist_inf(&g.constant(1.5 / 2.0)).unwrap() < 1e-14);

        let c = preset_fig0a(&g).unwrap();
        let risk = classify_risk(&c, MODERATE_TOL);
        let lp = so_limit_peng(0.0, &c, &g, 1.0).unwrap();
        let total = g.integrate(&lp.s).unwrap() + g.integrate(&lp.i).unwrap();
        assert!((total - 1.0).abs() < 1e-13);
        for d0 in [0.3, 3.0] {
            let lp = so_limit_peng(d0, &c, &g, 1.0).unwrap();
            for k in 0..g.n_nodes() {
                assert_eq!(lp.i[k] > 0.0, risk.is_high(k));
            }
        }
        let m = preset_moderate(&Grid::unit(40).unwrap()).unwrap();
        let lp = so_limit_peng(1.0, &m, &Grid::unit(40).unwrap(), 1.0).unwrap();
        assert!(lp.i.values()[10..=30].iter().all(|&v| v == 0.0));
        let inf = so_limit_peng(f64::INFINITY, &c, &g, 1.0).unwrap();
        assert_eq!(inf.i.max(), 0.0);
        assert!(so_limit_peng(0.0, &preset_homogeneous(&g, 1.0, 0.5, 1.0, 1.0).unwrap(), &g, 1.0).is_err());
        assert!(so_limit_peng(f64::INFINITY, &h, &g, 1.0).is_err());
    }

    #[test]
    fn apriori_audit() {
        let g = Grid::unit(50).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let rep = audit_apriori(&g.constant(2.0), &g.constant(1.0), &c, &g, APRIORI_SLACK).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.check("mass_balance").unwrap().value - 3.0).abs() < 1e-14);

        let f = preset_fig0a(&g).unwrap();
        let r = steady_from_dynamics(ModelKind::MW, 1.0, 1.0, &f, &g, 1e-10).unwrap();
        assert!(audit_apriori(&r.s, &r.i, &f, &g, APRIORI_SLACK).unwrap().passed());
        let bad = audit_apriori(&r.s.map(|v| 10.0 * v), &r.i, &f, &g, APRIORI_SLACK).unwrap();
        assert!(!bad.check("max_S").unwrap().passed);
        assert!(!bad.check("mass_balance").unwrap().passed);
    }

    #[test]
    fn di0_hypothesis() {
        let g = Grid::unit(50).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let sw = sweep(ModelKind::MW, SweepTarget::DiToZero { d_s: 1.0 }, &c, &g, &[1.0, 0.1], 1e-10).unwrap();
        let rep = di0_diagnostics(&sw, &c, &g).unwrap();
        assert_eq!(rep.int_i.len(), 2);
        assert!(rep.min_s.iter().all(|&m| m >= rep.s_lower_bound - 1e-6));
        let low = preset_homogeneous(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let e = di0_diagnostics(&sw, &low, &g).unwrap_err();
        assert!(matches!(e, Error::Hypothesis(ref m) if m.contains("min(γ + μ - βS̃)")));
    }
}

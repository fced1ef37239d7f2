//! Time integration of the reaction-diffusion systems.
//!
//! Diffusion is implicit (one tridiagonal solve per component), the reaction
//! explicit. Steps that would produce a negative density are rejected and
//! retried with half the step.

use std::f64::consts::PI;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kinetics::{reaction_unchecked, ModelKind};
use crate::linalg::solve_tridiagonal;
use crate::spectral::solve_dfe;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler diffusion, forward Euler reaction. First order.
    ImexEuler,
    /// Crank-Nicolson diffusion with a Heun reaction corrector. Second order.
    ImexTrapezoid,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex_euler" => Ok(Scheme::ImexEuler),
            "imex_trapezoid" => Ok(Scheme::ImexTrapezoid),
            _ => Err(Error::validation(format!("unknown scheme {s:?} (imex_euler | imex_trapezoid)"))),
        }
    }
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex_euler",
            Scheme::ImexTrapezoid => "imex_trapezoid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt_initial: f64,
    pub dt_min: f64,
    pub scheme: Scheme,
    pub positivity_retry: bool,
    /// Stop when `‖ΔS‖∞/dt + ‖ΔI‖∞/dt` falls to this value.
    pub steady_tol: f64,
    pub t_max: f64,
    /// Record every `trace_stride`-th accepted step (the final one always).
    pub trace_stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt_initial: 1e-2,
            dt_min: 1e-10,
            scheme: Scheme::ImexEuler,
            positivity_retry: true,
            steady_tol: 1e-10,
            t_max: 1e4,
            trace_stride: 100,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt_initial", self.dt_initial),
            ("dt_min", self.dt_min),
            ("steady_tol", self.steady_tol),
            ("t_max", self.t_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt_min > self.dt_initial {
            return Err(Error::validation("dt_min must not exceed dt_initial"));
        }
        if self.trace_stride == 0 {
            return Err(Error::validation("trace_stride must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub s: Field,
    pub i: Field,
    pub t: f64,
}

impl State {
    pub fn new(s: Field, i: Field, t: f64) -> Result<Self> {
        if s.shape() != i.shape() {
            return Err(Error::validation("S and I live on different grids"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::validation(format!("time must be nonnegative, got {t}")));
        }
        for (name, f) in [("S", &s), ("I", &i)] {
            if let Some(k) = f.values().iter().position(|&v| v < 0.0) {
                return Err(Error::validation(format!("{name} is negative at node {k}")));
            }
        }
        Ok(State { s, i, t })
    }

    /// True when `I > 0` at every node.
    pub fn infection_strictly_positive(&self) -> bool {
        self.i.values().iter().all(|&v| v > 0.0)
    }
}

/// Model, coefficients and diffusivities for one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct System<'a> {
    pub kind: ModelKind,
    pub grid: &'a Grid,
    pub coeffs: &'a CoefficientSet,
    pub d_s: f64,
    pub d_i: f64,
}

impl<'a> System<'a> {
    pub fn new(kind: ModelKind, grid: &'a Grid, coeffs: &'a CoefficientSet, d_s: f64, d_i: f64) -> Result<Self> {
        for (name, d) in [("d_S", d_s), ("d_I", d_i)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {d}")));
            }
        }
        grid.check(&coeffs.lambda)?;
        Ok(System { kind, grid, coeffs, d_s, d_i })
    }

    fn reaction(&self, s: &[f64], i: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut fs = vec![0.0; s.len()];
        let mut fi = vec![0.0; s.len()];
        for k in 0..s.len() {
            // negative entries never reach here: accepted states are nonnegative
            let r = reaction_unchecked(self.kind, &self.coeffs.at(k), s[k], i[k]);
            fs[k] = r.f_s;
            fi[k] = r.f_i;
        }
        (fs, fi)
    }

    /// Solves `(I - a L) x = rhs`.
    fn implicit_diffusion(&self, a: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let lap = self.grid.laplacian();
        let n = rhs.len();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for k in 0..n {
            let (l, d, u) = lap.row(k);
            lower[k] = -a * l;
            diag[k] = 1.0 - a * d;
            upper[k] = -a * u;
        }
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    }

    fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.grid.laplacian().apply_slice(u, &mut out);
        out
    }
}

/// A rejected step: first negative value found.
struct Negative {
    field: &'static str,
    node: usize,
    value: f64,
}

fn first_negative(s: &[f64], i: &[f64]) -> Option<Negative> {
    for (field, v) in [("S", s), ("I", i)] {
        if let Some(node) = v.iter().position(|&x| !(x >= 0.0)) {
            return Some(Negative { field, node, value: v[node] });
        }
    }
    None
}

fn raw_step(sys: &System, scheme: Scheme, s: &[f64], i: &[f64], dt: f64) -> Result<std::result::Result<(Vec<f64>, Vec<f64>), Negative>> {
    let (fs, fi) = sys.reaction(s, i);
    let euler = |fs: &[f64], fi: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let rs: Vec<f64> = (0..s.len()).map(|k| s[k] + dt * fs[k]).collect();
        let ri: Vec<f64> = (0..s.len()).map(|k| i[k] + dt * fi[k]).collect();
        Ok((sys.implicit_diffusion(dt * sys.d_s, &rs)?, sys.implicit_diffusion(dt * sys.d_i, &ri)?))
    };
    let (s1, i1) = euler(&fs, &fi)?;
    if let Some(neg) = first_negative(&s1, &i1) {
        return Ok(Err(neg));
    }
    if scheme == Scheme::ImexEuler {
        return Ok(Ok((s1, i1)));
    }
    let (gs, gi) = sys.reaction(&s1, &i1);
    let ls = sys.apply_laplacian(s);
    let li = sys.apply_laplacian(i);
    let half = 0.5 * dt;
    let rs: Vec<f64> = (0..s.len())
        .map(|k| s[k] + half * sys.d_s * ls[k] + half * (fs[k] + gs[k]))
        .collect();
    let ri: Vec<f64> = (0..s.len())
        .map(|k| i[k] + half * sys.d_i * li[k] + half * (fi[k] + gi[k]))
        .collect();
    let s2 = sys.implicit_diffusion(half * sys.d_s, &rs)?;
    let i2 = sys.implicit_diffusion(half * sys.d_i, &ri)?;
    Ok(match first_negative(&s2, &i2) {
        Some(neg) => Err(neg),
        None => Ok((s2, i2)),
    })
}

/// Advances by `dt` or, after rejections, by the largest accepted
/// `dt / 2^k >= dt_min`. Returns the new state and the step taken.
pub fn step_with_dt(state: &State, sys: &System, config: &StepperConfig, dt: f64) -> Result<(State, f64)> {
    sys.grid.check(&state.s)?;
    let mut dt = dt;
    loop {
        match raw_step(sys, config.scheme, state.s.values(), state.i.values(), dt)? {
            Ok((s, i)) => {
                let shape = state.s.shape();
                return Ok((
                    State {
                        s: Field::from_raw(shape, s),
                        i: Field::from_raw(shape, i),
                        t: state.t + dt,
                    },
                    dt,
                ));
            }
            Err(neg) => {
                if !config.positivity_retry || dt * 0.5 < config.dt_min {
                    return Err(Error::Positivity {
                        field: neg.field,
                        node: neg.node,
                        value: neg.value,
                        dt,
                    });
                }
                dt *= 0.5;
            }
        }
    }
}

/// One step starting from `config.dt_initial`.
pub fn step(state: &State, sys: &System, config: &StepperConfig) -> Result<State> {
    config.validate()?;
    step_with_dt(state, sys, config, config.dt_initial).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub total_s: f64,
    pub total_i: f64,
    pub min_i: f64,
    pub max_s: f64,
    pub lyapunov: Option<f64>,
    /// Size of the step that produced this sample (0 for the initial one).
    pub dt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsTrace {
    pub samples: Vec<TraceSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Steady,
    TMaxReached,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Steady => "steady",
            Verdict::TMaxReached => "t_max_reached",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: State,
    pub trace: DiagnosticsTrace,
    pub verdict: Verdict,
    pub steps: usize,
}

/// Which Lyapunov functional applies along a trajectory, if any.
#[derive(Debug, Clone, Copy)]
enum Functional {
    V,
    W,
}

fn applicable_functional(sys: &System) -> Option<Functional> {
    if sys.kind != ModelKind::MW || sys.d_s != sys.d_i {
        return None;
    }
    let c = sys.coeffs.homogeneous_values().ok()?;
    Some(if c.beta * c.lambda / (c.gamma + c.mu) > 1.0 {
        Functional::W
    } else {
        Functional::V
    })
}

fn sample(state: &State, sys: &System, functional: Option<Functional>, dt: f64) -> TraceSample {
    let lyapunov = functional.and_then(|f| match f {
        Functional::V => lyapunov_v(state, sys.coeffs, sys.grid).ok(),
        Functional::W => lyapunov_w(state, sys.coeffs, sys.grid).ok(),
    });
    TraceSample {
        t: state.t,
        total_s: sys.grid.integrate_slice(state.s.values()),
        total_i: sys.grid.integrate_slice(state.i.values()),
        min_i: state.i.min(),
        max_s: state.s.max(),
        lyapunov,
        dt,
    }
}

/// Integrates until the discrete rate drops to `steady_tol` or `t_max` is
/// reached. After a rejection the step grows back by doubling, up to
/// `dt_initial`. The Lyapunov column is filled for homogeneous MW runs with
/// `d_S = d_I`.
pub fn run(state0: State, sys: &System, config: &StepperConfig) -> Result<RunResult> {
    config.validate()?;
    sys.grid.check(&state0.s)?;
    sys.grid.check(&state0.i)?;
    let functional = applicable_functional(sys);
    let mut trace = DiagnosticsTrace {
        samples: vec![sample(&state0, sys, functional, 0.0)],
    };
    let mut state = state0;
    let mut dt = config.dt_initial;
    let mut steps = 0;
    loop {
        let remaining = config.t_max - state.t;
        let trial = dt.min(remaining);
        let (next, taken) = step_with_dt(&state, sys, config, trial)?;
        steps += 1;
        let rate = (next.s.dist_inf(&state.s)? + next.i.dist_inf(&state.i)?) / taken;
        let steady = rate <= config.steady_tol;
        let done = steady || next.t >= config.t_max * (1.0 - 1e-15);
        if taken < trial {
            dt = taken;
        } else if taken == dt {
            dt = (dt * 2.0).min(config.dt_initial);
        }
        state = next;
        if steps % config.trace_stride == 0 || done {
            trace.samples.push(sample(&state, sys, functional, taken));
        }
        if done {
            let verdict = if steady { Verdict::Steady } else { Verdict::TMaxReached };
            return Ok(RunResult { state, trace, verdict, steps });
        }
    }
}

fn homogeneous_mw(coeffs: &CoefficientSet, what: &str) -> Result<crate::coeffs::NodeCoeffs> {
    coeffs
        .homogeneous_values()
        .map_err(|_| Error::validation(format!("{what} is defined only for homogeneous coefficients")))
}

/// `V = ½∫[(S - Λ) + I]² + ((μ + 1)/β)∫I`.
pub fn lyapunov_v(state: &State, coeffs: &CoefficientSet, grid: &Grid) -> Result<f64> {
    let c = homogeneous_mw(coeffs, "V")?;
    grid.check(&state.s)?;
    let sq: Vec<f64> = (0..grid.n_nodes())
        .map(|k| {
            let x = state.s[k] - c.lambda + state.i[k];
            0.5 * x * x
        })
        .collect();
    Ok(grid.integrate_slice(&sq) + (c.mu + 1.0) / c.beta * grid.integrate_slice(state.i.values()))
}

/// Constant endemic equilibrium `(Ŝ, Î)` of the homogeneous MW model.
pub fn homogeneous_endemic(coeffs: &CoefficientSet) -> Result<(f64, f64)> {
    let c = homogeneous_mw(coeffs, "the constant endemic equilibrium")?;
    let s_hat = (c.gamma + c.mu) / c.beta;
    if c.lambda <= s_hat {
        return Err(Error::validation(format!(
            "R0 = {} <= 1: no endemic equilibrium",
            c.lambda / s_hat
        )));
    }
    Ok((s_hat, (c.lambda - s_hat) / c.mu))
}

/// `W = ½∫[(S - Ŝ) + (I - Î)]² + ((μ + 1)/β)∫(I - Î - Î ln(I/Î))`.
pub fn lyapunov_w(state: &State, coeffs: &CoefficientSet, grid: &Grid) -> Result<f64> {
    let c = homogeneous_mw(coeffs, "W")?;
    let (s_hat, i_hat) = homogeneous_endemic(coeffs)?;
    grid.check(&state.s)?;
    if let Some(k) = state.i.values().iter().position(|&v| v <= 0.0) {
        return Err(Error::validation(format!("W needs I > 0, found {} at node {k}", state.i[k])));
    }
    let n = grid.n_nodes();
    let sq: Vec<f64> = (0..n)
        .map(|k| {
            let x = state.s[k] - s_hat + state.i[k] - i_hat;
            0.5 * x * x
        })
        .collect();
    let entropy: Vec<f64> = (0..n)
        .map(|k| {
            let r = state.i[k] / i_hat;
            // i_hat·(r - 1 - ln r), with ln_1p for accuracy near r = 1
            i_hat * ((r - 1.0) - (r - 1.0).ln_1p())
        })
        .collect();
    Ok(grid.integrate_slice(&sq) + (c.mu + 1.0) / c.beta * grid.integrate_slice(&entropy))
}

/// Outcome of [`dissipation_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    /// `min{1, μ_*}` for MW, 0 for SW (no death term on I).
    pub theta: f64,
    /// `∫Λ`, zero for the conserved models.
    pub recruitment: f64,
    /// Indices `k` where the interval `[t_{k-1}, t_k]` violates the bound.
    pub violations: Vec<usize>,
    pub max_excess: f64,
    /// `max(initial total, ∫Λ/θ)`.
    pub absorbing_bound: f64,
    pub absorbing_ok: bool,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.absorbing_ok
    }
}

/// Checks the integrated Gronwall inequality for `T = ∫(S + I)`:
/// `T_k ≤ T_{k-1} e^{-θΔt} + (∫Λ/θ)(1 - e^{-θΔt}) + slack`, where the slack
/// covers the first-order time-discretization error
/// (`θ Δt · dt · (∫Λ + θ T)`) plus a relative `tol`. Conserved models must
/// keep `T` constant to `tol`.
pub fn dissipation_check(trace: &DiagnosticsTrace, coeffs: &CoefficientSet, kind: ModelKind, grid: &Grid, tol: f64) -> Result<DissipationReport> {
    let samples = &trace.samples;
    if samples.is_empty() {
        return Err(Error::validation("empty trace"));
    }
    let (theta, recruitment) = match kind {
        ModelKind::MO | ModelKind::SO => (0.0, 0.0),
        ModelKind::MW => (coeffs.mu.min().min(1.0), grid.integrate(&coeffs.lambda)?),
        ModelKind::SW => (0.0, grid.integrate(&coeffs.lambda)?),
    };
    let totals: Vec<f64> = samples.iter().map(|s| s.total_s + s.total_i).collect();
    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for k in 1..samples.len() {
        let delta = samples[k].t - samples[k - 1].t;
        let prev = totals[k - 1];
        let bound = if theta > 0.0 {
            let decay = (-theta * delta).exp();
            prev * decay + recruitment / theta * (1.0 - decay)
        } else {
            prev + recruitment * delta
        };
        let slack = theta * delta * samples[k].dt * (recruitment + theta * prev) + tol * prev.abs().max(1.0);
        let excess = totals[k] - bound;
        max_excess = max_excess.max(excess);
        if excess > slack {
            violations.push(k);
        }
        if kind.conserves_mass() && (totals[k] - totals[0]).abs() > tol * totals[0] {
            violations.push(k);
        }
    }
    violations.dedup();
    let absorbing_bound = if theta > 0.0 {
        totals[0].max(recruitment / theta)
    } else if recruitment == 0.0 {
        totals[0]
    } else {
        f64::INFINITY
    };
    let absorbing_ok = totals.iter().all(|&t| t <= absorbing_bound * (1.0 + tol));
    Ok(DissipationReport {
        theta,
        recruitment,
        violations,
        max_excess: if samples.len() > 1 { max_excess } else { 0.0 },
        absorbing_bound,
        absorbing_ok,
    })
}

/// Amplitude of the initial infection bump relative to the density scale.
pub const INITIAL_BUMP: f64 = 0.1;

/// Initial data for figure runs: `S₀ = S̃`, `I₀ = 0.1(1 + cos 2πx/L)` for
/// MW/SW; for MO/SO, `S₀ = (1 - ε)N/|Ω|` and `I₀ = ε(N/|Ω|)(1 + cos 2πx/L)`
/// with `ε = 0.1`, so `∫(S₀ + I₀) = N`.
pub fn default_initial_state(kind: ModelKind, coeffs: &CoefficientSet, grid: &Grid, d_s: f64) -> Result<State> {
    let len = grid.length();
    let bump = grid.sample(|x| 1.0 + (2.0 * PI * x / len).cos());
    let (s, i) = if kind.conserves_mass() {
        let mean = coeffs.total_mass()? / len;
        (grid.constant((1.0 - INITIAL_BUMP) * mean), bump.map(|b| INITIAL_BUMP * mean * b))
    } else {
        (solve_dfe(d_s, coeffs, grid)?, bump.map(|b| INITIAL_BUMP * b))
    };
    State::new(s, i, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{preset_fig0a, preset_homogeneous};

    fn hom(beta: f64) -> (Grid, CoefficientSet) {
        let g = Grid::unit(40).unwrap();
        let c = preset_homogeneous(&g, 3.0, beta, 1.0, 1.0).unwrap();
        (g, c)
    }

    fn cfg(scheme: Scheme, dt: f64) -> StepperConfig {
        StepperConfig {
            dt_initial: dt,
            scheme,
            ..StepperConfig::default()
        }
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let (g, c) = hom(1.0);
        let sys = System::new(ModelKind::MW, &g, &c, 1.0, 1.0).unwrap();
        for scheme in [Scheme::ImexEuler, Scheme::ImexTrapezoid] {
            let dfe = State::new(g.constant(3.0), g.constant(0.0), 0.0).unwrap();
            let next = step(&dfe, &sys, &cfg(scheme, 0.1)).unwrap();
            assert!(next.s.dist_inf(&dfe.s).unwrap() <= 1e-14);
            assert!(next.i.dist_inf(&dfe.i).unwrap() <= 1e-14);
            let ee = State::new(g.constant(2.0), g.constant(1.0), 0.0).unwrap();
            let next = step(&ee, &sys, &cfg(scheme, 0.1)).unwrap();
            assert!(next.s.dist_inf(&ee.s).unwrap() <= 1e-12);
            assert!(next.i.dist_inf(&ee.i).unwrap() <= 1e-12);
            assert!((next.t - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn conserved_models_keep_mass_per_step() {
        let g = Grid::unit(64).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for kind in [ModelKind::MO, ModelKind::SO] {
            let sys = System::new(kind, &g, &c, 0.3, 0.01).unwrap();
            let mut st = State::new(g.sample(|x| 0.5 + x * x), g.sample(|x| 0.2 * (1.0 + (7.0 * x).sin())), 0.0).unwrap();
            let before = g.integrate(&st.s).unwrap() + g.integrate(&st.i).unwrap();
            for scheme in [Scheme::ImexEuler, Scheme::ImexTrapezoid] {
                st = step(&st, &sys, &cfg(scheme, 0.05)).unwrap();
                let after = g.integrate(&st.s).unwrap() + g.integrate(&st.i).unwrap();
                assert!((after - before).abs() <= 1e-12 * before);
            }
        }
    }

    #[test]
    fn positivity_retry_halves_dt() {
        let (g, c) = hom(1.0);
        let sys = System::new(ModelKind::MW, &g, &c, 1.0, 1.0).unwrap();
        // explicit reaction with a huge step drives S negative
        let st = State::new(g.constant(3.0), g.constant(5.0), 0.0).unwrap();
        let (next, dt) = step_with_dt(&st, &sys, &cfg(Scheme::ImexEuler, 1.0), 1.0).unwrap();
        assert!(dt < 1.0 && next.s.min() >= 0.0 && next.i.min() >= 0.0);
        let no_retry = StepperConfig {
            positivity_retry: false,
            ..cfg(Scheme::ImexEuler, 1.0)
        };
        let e = step(&st, &sys, &no_retry).unwrap_err();
        assert!(matches!(e, Error::Positivity { field: "S", .. }), "{e}");
    }

    fn final_state(scheme: Scheme, dt: f64) -> State {
        let g = Grid::unit(40).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let sys = System::new(ModelKind::MW, &g, &c, 0.1, 0.1).unwrap();
        let st = State::new(g.sample(|x| 2.0 + (PI * x).cos()), g.sample(|x| 0.5 + 0.4 * (2.0 * PI * x).cos()), 0.0).unwrap();
        let config = StepperConfig {
            t_max: 1.0,
            steady_tol: 1e-300,
            ..cfg(scheme, dt)
        };
        run(st, &sys, &config).unwrap().state
    }

    fn err(a: &State, b: &State) -> f64 {
        a.s.dist_inf(&b.s).unwrap().max(a.i.dist_inf(&b.i).unwrap())
    }

    #[test]
    fn scheme_orders() {
        for (scheme, expected) in [(Scheme::ImexEuler, 1.0), (Scheme::ImexTrapezoid, 2.0)] {
            let reference = final_state(scheme, 1e-4);
            let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| err(&final_state(scheme, dt), &reference)).collect();
            let p1 = (e[0] / e[1]).log2();
            let p2 = (e[1] / e[2]).log2();
            assert!((p1 - expected).abs() < 0.2 && (p2 - expected).abs() < 0.2, "{scheme:?}: {e:?} orders {p1} {p2}");
        }
    }

    #[test]
    fn homogeneous_convergence_and_lyapunov() {
        for (beta, target) in [(1.0, (2.0, 1.0)), (0.5, (3.0, 0.0))] {
            let (g, c) = hom(beta);
            let sys = System::new(ModelKind::MW, &g, &c, 1.0, 1.0).unwrap();
            let st = State::new(g.sample(|x| 1.0 + x), g.sample(|x| 0.3 + 0.2 * (3.0 * x).sin()), 0.0).unwrap();
            let config = StepperConfig {
                trace_stride: 1,
                ..cfg(Scheme::ImexEuler, 0.01)
            };
            let r = run(st, &sys, &config).unwrap();
            assert_eq!(r.verdict, Verdict::Steady);
            assert!(r.state.s.dist_inf(&g.constant(target.0)).unwrap() <= 1e-6);
            assert!(r.state.i.dist_inf(&g.constant(target.1)).unwrap() <= 1e-6);
            assert!(r.state.infection_strictly_positive());
            let ly: Vec<f64> = r.trace.samples.iter().map(|s| s.lyapunov.unwrap()).collect();
            assert!(ly.windows(2).all(|w| w[1] <= w[0] + 1e-14), "functional increased");
            let ts: Vec<f64> = r.trace.samples.iter().map(|s| s.t).collect();
            assert!(ts.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn lyapunov_examples() {
        let (g, c) = hom(1.0);
        let dfe = State::new(g.constant(3.0), g.constant(0.0), 0.0).unwrap();
        assert_eq!(lyapunov_v(&dfe, &c, &g).unwrap(), 0.0);
        let st = State::new(g.constant(3.0), g.constant(0.4), 0.0).unwrap();
        assert!((lyapunov_v(&st, &c, &g).unwrap() - (0.5 * 0.16 + 2.0 * 0.4)).abs() < 1e-14);
        let ee = State::new(g.constant(2.0), g.constant(1.0), 0.0).unwrap();
        assert_eq!(lyapunov_w(&ee, &c, &g).unwrap(), 0.0);
        let shifted = State::new(g.constant(2.5), g.constant(1.0), 0.0).unwrap();
        assert!((lyapunov_w(&shifted, &c, &g).unwrap() - 0.125).abs() < 1e-14);
        assert!(lyapunov_w(&dfe, &c, &g).is_err());
        let (_, low) = hom(0.5);
        assert!(lyapunov_w(&ee, &low, &g).is_err());
        let het = preset_fig0a(&g).unwrap();
        assert!(lyapunov_v(&dfe, &het, &g).is_err());
    }

    #[test]
    fn dissipation_report() {
        let (g, c) = hom(1.0);
        let sys = System::new(ModelKind::MW, &g, &c, 1.0, 1.0).unwrap();
        let st = State::new(g.constant(6.0), g.constant(2.0), 0.0).unwrap();
        let config = StepperConfig {
            t_max: 20.0,
            trace_stride: 5,
            ..cfg(Scheme::ImexEuler, 0.01)
        };
        let r = run(st, &sys, &config).unwrap();
        let rep = dissipation_check(&r.trace, &c, ModelKind::MW, &g, 1e-10).unwrap();
        assert_eq!(rep.theta, 1.0);
        assert!((rep.absorbing_bound - 8.0).abs() < 1e-13);
        assert!(rep.passed(), "{rep:?}");

        let mut bad = r.trace.clone();
        let mid = bad.samples.len() / 2;
        bad.samples[mid].total_s *= 2.0;
        bad.samples[mid].total_i *= 2.0;
        let rep = dissipation_check(&bad, &c, ModelKind::MW, &g, 1e-10).unwrap();
        assert!(rep.violations.contains(&mid));

        let f = preset_fig0a(&g).unwrap();
        let sys = System::new(ModelKind::MO, &g, &f, 1.0, 0.1).unwrap();
        let st = default_initial_state(ModelKind::MO, &f, &g, 1.0).unwrap();
        let r = run(st, &sys, &StepperConfig { t_max: 5.0, trace_stride: 1, ..cfg(Scheme::ImexEuler, 0.01) }).unwrap();
        let rep = dissipation_check(&r.trace, &f, ModelKind::MO, &g, 1e-10).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn default_initial_data_mass() {
        let g = Grid::unit(100).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for kind in ModelKind::ALL {
            let st = default_initial_state(kind, &c, &g, 1.0).unwrap();
            assert!(g.integrate(&st.i).unwrap() > 0.0);
            if kind.conserves_mass() {
                let m = g.integrate(&st.s).unwrap() + g.integrate(&st.i).unwrap();
                assert!((m - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = StepperConfig {
            dt_min: 1.0,
            dt_initial: 0.1,
            ..StepperConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("imex_rk".parse::<Scheme>().is_err());
    }
}

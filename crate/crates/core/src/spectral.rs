//! Disease-free equilibrium, principal eigenpairs and basic reproduction
//! numbers.
//!
//! All four reproduction numbers are suprema of a discrete Rayleigh quotient
//!
//! ```text
//!            c · Σ w_i a_i φ_i²
//! R(φ) = ─────────────────────────────
//!         d_I φᵀ K φ + Σ w_i b_i φ_i²
//! ```
//!
//! with stiffness `K = -W L`, numerator weight `a` (`βS̃` for MW, `β`
//! otherwise), denominator weight `b` (`γ + μ` for MW, `γ` otherwise) and
//! scalar `c` (`N/|Ω|` for MO, 1 otherwise). The supremum is `c / τ` where
//! `τ` is the smallest eigenvalue of the symmetric tridiagonal matrix
//! `A^{-1/2} B A^{-1/2}` (`A = W a`, `B = d_I K + W b`). That eigenvalue is
//! bracketed by Sturm bisection and polished by shifted inverse iteration.

use rayon::prelude::*;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kinetics::ModelKind;
use crate::linalg::{solve_tridiagonal, SymTridiagonal};

const EIGEN_TOL: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 10_000;
/// Residual bound for eigenpairs, relative to `max(1, ‖operator‖)`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Solves `-d_S ΔS + S = Λ` with Neumann boundary conditions.
pub fn solve_dfe(d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<Field> {
    if !(d_s > 0.0 && d_s.is_finite()) {
        return Err(Error::validation(format!("d_S must be positive, got {d_s}")));
    }
    grid.check(&coeffs.lambda)?;
    let lap = grid.laplacian();
    let n = grid.n_nodes();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let (l, d, u) = lap.row(i);
        lower[i] = -d_s * l;
        diag[i] = 1.0 - d_s * d;
        upper[i] = -d_s * u;
    }
    let s = solve_tridiagonal(&lower, &diag, &upper, coeffs.lambda.values())?;
    let field = grid.field(s)?;
    // residual of the linear solve
    let ls = lap.apply(&field)?;
    let scale = coeffs.lambda.norm_inf();
    let res = (0..n)
        .map(|i| (d_s * ls[i] + coeffs.lambda[i] - field[i]).abs())
        .fold(0.0, f64::max);
    let op_norm = 1.0 + 4.0 * d_s / (grid.h() * grid.h());
    if res > 1e-12 * (scale + op_norm * field.norm_inf()) {
        return Err(Error::NoConvergence {
            solver: "DFE linear solve",
            iterations: 1,
            residual: res,
        });
    }
    if field.min() <= 0.0 {
        return Err(Error::validation("disease-free susceptible density is not positive"));
    }
    Ok(field)
}

/// Principal eigenpair `(λ*, ψ*)` of `d_I Δψ + pψ + λψ = 0` (Neumann).
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Positive, normalized to `max ψ = 1`.
    pub eigenfunction: Field,
    pub residual: f64,
    pub iterations: usize,
}

pub fn principal_eigenpair(d_i: f64, potential: &Field, grid: &Grid) -> Result<EigenResult> {
    if !(d_i > 0.0 && d_i.is_finite()) {
        return Err(Error::validation(format!("d_I must be positive, got {d_i}")));
    }
    grid.check(potential)?;
    let lap = grid.laplacian();
    let (kd, ko) = lap.stiffness(grid);
    let w = grid.weights();
    let n = grid.n_nodes();
    let diag: Vec<f64> = (0..n).map(|i| d_i * kd[i] / w[i] - potential[i]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| d_i * ko[i] / (w[i] * w[i + 1]).sqrt()).collect();
    let t = SymTridiagonal::new(diag, off);
    let (_, y, iterations) = t.smallest_eigenpair(EIGEN_TOL, EIGEN_MAX_ITER)?;
    let psi = normalize_positive(y.iter().zip(w).map(|(v, wi)| v / wi.sqrt()).collect())?;
    let psi = grid.field(psi)?;
    let mass: f64 = (0..n).map(|i| w[i] * psi[i] * psi[i]).sum();
    let lambda = (d_i * dirichlet_energy(psi.values(), grid.h())
        - (0..n).map(|i| w[i] * potential[i] * psi[i] * psi[i]).sum::<f64>())
        / mass;

    let lpsi = lap.apply(&psi)?;
    let residual = (0..n)
        .map(|i| (d_i * lpsi[i] + potential[i] * psi[i] + lambda * psi[i]).abs())
        .fold(0.0, f64::max);
    let op_scale = 4.0 * d_i / (grid.h() * grid.h()) + potential.norm_inf();
    if residual > EIGEN_RESIDUAL_TOL * op_scale.max(1.0) {
        return Err(Error::NoConvergence {
            solver: "principal eigenpair",
            iterations,
            residual,
        });
    }
    Ok(EigenResult {
        eigenvalue: lambda,
        eigenfunction: psi,
        residual,
        iterations,
    })
}

fn dirichlet_energy(p: &[f64], h: f64) -> f64 {
    p.windows(2).map(|d| (d[1] - d[0]) * (d[1] - d[0])).sum::<f64>() / h
}

/// Flips the sign so the vector is positive and scales it to max 1.
/// Components that round to tiny negatives are treated as failure.
fn normalize_positive(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let vmax = *v.iter().max_by(|a, b| a.abs().total_cmp(&b.abs())).expect("nonempty");
    if vmax == 0.0 || !vmax.is_finite() {
        return Err(Error::NoConvergence {
            solver: "principal eigenvector",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    v.iter_mut().for_each(|a| *a /= vmax);
    if let Some(i) = v.iter().position(|&a| a <= 0.0) {
        // a principal eigenvector has one sign; exact zeros only appear by underflow
        if v[i] < -1e-12 {
            return Err(Error::NoConvergence {
                solver: "principal eigenvector (sign change)",
                iterations: 0,
                residual: v[i],
            });
        }
        v.iter_mut().for_each(|a| *a = a.max(f64::MIN_POSITIVE));
    }
    Ok(v)
}

/// Pointwise data of the Rayleigh quotient defining `R0` for a model.
#[derive(Debug, Clone)]
pub struct Quotient {
    /// Numerator weight before the scalar factor (`βS̃` or `β`).
    pub numerator: Field,
    /// Denominator weight (`γ + μ` or `γ`).
    pub denominator: Field,
    /// `N/|Ω|` for MO, 1 otherwise.
    pub scale: f64,
}

impl Quotient {
    pub fn for_model(kind: ModelKind, d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<Self> {
        Ok(match kind {
            ModelKind::MW => {
                let s_tilde = solve_dfe(d_s, coeffs, grid)?;
                Quotient {
                    numerator: coeffs.beta.zip_map(&s_tilde, |b, s| b * s)?,
                    denominator: coeffs.gamma.zip_map(&coeffs.mu, |g, m| g + m)?,
                    scale: 1.0,
                }
            }
            ModelKind::SO | ModelKind::SW => Quotient {
                numerator: coeffs.beta.clone(),
                denominator: coeffs.gamma.clone(),
                scale: 1.0,
            },
            ModelKind::MO => Quotient {
                numerator: coeffs.beta.clone(),
                denominator: coeffs.gamma.clone(),
                scale: coeffs.total_mass()? / grid.length(),
            },
        })
    }

    /// `scale · a - b`: the potential whose principal eigenvalue has the
    /// opposite sign of `R0 - 1`.
    pub fn potential(&self) -> Field {
        self.numerator
            .zip_map(&self.denominator, |a, b| self.scale * a - b)
            .expect("same grid")
    }

    /// Discrete Rayleigh quotient at `phi`. The stiffness form is summed as
    /// `Σ (φ_{i+1} - φ_i)² / h`, which vanishes exactly on constants.
    pub fn evaluate(&self, d_i: f64, phi: &Field, grid: &Grid) -> Result<f64> {
        grid.check(phi)?;
        let w = grid.weights();
        let p = phi.values();
        let num: f64 = (0..p.len()).map(|i| w[i] * self.numerator[i] * p[i] * p[i]).sum();
        let den: f64 = (0..p.len()).map(|i| w[i] * self.denominator[i] * p[i] * p[i]).sum::<f64>()
            + d_i * dirichlet_energy(p, grid.h());
        Ok(self.scale * num / den)
    }

    /// `(d_I → 0, d_I → ∞)` limits: `max(c a / b)` and `c ∫a / ∫b`.
    pub fn limits(&self, grid: &Grid) -> Result<(f64, f64)> {
        let low = self
            .numerator
            .zip_map(&self.denominator, |a, b| self.scale * a / b)?
            .max();
        let high = self.scale * grid.integrate(&self.numerator)? / grid.integrate(&self.denominator)?;
        Ok((low, high))
    }
}

#[derive(Debug, Clone)]
pub struct R0Result {
    pub value: f64,
    /// Maximizing `φ`, positive with `max φ = 1`.
    pub maximizer: Field,
    pub model: ModelKind,
    pub d_i: f64,
    /// Only MW depends on `d_S`.
    pub d_s: Option<f64>,
    pub iterations: usize,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::validation(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub fn compute_r0(kind: ModelKind, d_i: f64, d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<R0Result> {
    check_positive("d_I", d_i)?;
    check_positive("d_S", d_s)?;
    let q = Quotient::for_model(kind, d_s, coeffs, grid)?;
    let (value, maximizer, iterations) = quotient_supremum(&q, d_i, grid)?;
    Ok(R0Result {
        value,
        maximizer,
        model: kind,
        d_i,
        d_s: (kind == ModelKind::MW).then_some(d_s),
        iterations,
    })
}

/// `R0` at each `d_I` of `d_is`, evaluated in parallel; order is preserved.
pub fn r0_curve(kind: ModelKind, d_is: &[f64], d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<Vec<R0Result>> {
    d_is.par_iter().map(|&d_i| compute_r0(kind, d_i, d_s, coeffs, grid)).collect()
}

fn quotient_supremum(q: &Quotient, d_i: f64, grid: &Grid) -> Result<(f64, Field, usize)> {
    let (kd, ko) = grid.laplacian().stiffness(grid);
    let w = grid.weights();
    let n = grid.n_nodes();
    let a: Vec<f64> = (0..n).map(|i| w[i] * q.numerator[i]).collect();
    if let Some(i) = a.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::validation(format!("R0 numerator weight not positive at node {i}")));
    }
    let diag: Vec<f64> = (0..n).map(|i| (d_i * kd[i] + w[i] * q.denominator[i]) / a[i]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| d_i * ko[i] / (a[i] * a[i + 1]).sqrt()).collect();
    let t = SymTridiagonal::new(diag, off);
    let (tau, y, iterations) = t.smallest_eigenpair(EIGEN_TOL, EIGEN_MAX_ITER)?;
    if !(tau > 0.0) {
        return Err(Error::validation("R0 denominator operator is not positive definite"));
    }
    let phi = grid.field(normalize_positive(y.iter().zip(&a).map(|(v, ai)| v / ai.sqrt()).collect())?)?;
    // the quotient at the eigenvector is second-order accurate in its error
    let value = q.evaluate(d_i, &phi, grid)?;
    Ok((value, phi, iterations))
}

/// Closed-form limits of `R0` as `d_I → 0` and `d_I → ∞`.
pub fn r0_limits(kind: ModelKind, d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<(f64, f64)> {
    check_positive("d_S", d_s)?;
    Quotient::for_model(kind, d_s, coeffs, grid)?.limits(grid)
}

/// Principal eigenvalue for the model's linearized infection operator at
/// the disease-free state. Negative exactly when `R0 > 1`.
pub fn lambda_star(kind: ModelKind, d_i: f64, d_s: f64, coeffs: &CoefficientSet, grid: &Grid) -> Result<EigenResult> {
    let q = Quotient::for_model(kind, d_s, coeffs, grid)?;
    principal_eigenpair(d_i, &q.potential(), grid)
}

const THRESHOLD_TOL: f64 = 1e-8;
const THRESHOLD_MAX_ITER: usize = 200;
const AUTO_BRACKET: (f64, f64) = (1e-8, 1e8);

/// Diffusivity `d_I*` at which `R0 = 1`, by bisection in `log d_I`.
///
/// Without a bracket, one is found by factor-10 probing from `d_I = 1`
/// within `[1e-8, 1e8]`.
pub fn find_threshold_di(
    kind: ModelKind,
    d_s: f64,
    coeffs: &CoefficientSet,
    grid: &Grid,
    bracket: Option<(f64, f64)>,
) -> Result<f64> {
    check_positive("d_S", d_s)?;
    let q = Quotient::for_model(kind, d_s, coeffs, grid)?;
    let pot = q.potential();
    let int_num = q.scale * grid.integrate(&q.numerator)?;
    let int_den = grid.integrate(&q.denominator)?;
    if int_num > int_den {
        return Err(Error::Hypothesis(format!(
            "∫(numerator) = {int_num:.6} > ∫(denominator) = {int_den:.6}: R0 > 1 for all d_I"
        )));
    }
    if pot.max() <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "numerator - denominator <= 0 everywhere (max {:.3e}): R0 <= 1 for all d_I",
            pot.max()
        )));
    }
    if pot.min() >= 0.0 {
        return Err(Error::Hypothesis(
            "numerator - denominator does not change sign: no threshold diffusivity".into(),
        ));
    }
    let r0 = |d: f64| quotient_supremum(&q, d, grid).map(|r| r.0);

    let (mut lo, mut hi) = match bracket {
        Some((lo, hi)) => {
            check_positive("bracket low", lo)?;
            check_positive("bracket high", hi)?;
            if lo >= hi {
                return Err(Error::validation("bracket must satisfy low < high"));
            }
            (lo, hi)
        }
        None => {
            let mut lo = 1.0;
            while r0(lo)? <= 1.0 && lo > AUTO_BRACKET.0 {
                lo /= 10.0;
            }
            let mut hi = 1.0;
            while r0(hi)? >= 1.0 && hi < AUTO_BRACKET.1 {
                hi *= 10.0;
            }
            (lo, hi)
        }
    };
    let (r_lo, r_hi) = (r0(lo)?, r0(hi)?);
    if !(r_lo > 1.0) {
        return Err(Error::Hypothesis(format!("R0({lo:e}) = {r_lo:.10} is not above 1 at the bracket's low end")));
    }
    if !(r_hi < 1.0) {
        return Err(Error::Hypothesis(format!("R0({hi:e}) = {r_hi:.10} is not below 1 at the bracket's high end")));
    }
    for _ in 0..THRESHOLD_MAX_ITER {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        let r = r0(mid)?;
        if (r - 1.0).abs() <= THRESHOLD_TOL {
            return Ok(mid);
        }
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 4.0 * f64::EPSILON {
            return Ok(mid);
        }
    }
    Err(Error::NoConvergence {
        solver: "d_I threshold bisection",
        iterations: THRESHOLD_MAX_ITER,
        residual: (r0(lo)? - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{from_expressions, preset_fig0a, preset_homogeneous};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    /// Dense generalized eigenvalue oracle: largest eigenvalue of B^{-1} A
    /// computed through a Cholesky factor of B.
    fn dense_r0(q: &Quotient, d_i: f64, grid: &Grid) -> f64 {
        let n = grid.n_nodes();
        let (kd, ko) = grid.laplacian().stiffness(grid);
        let w = grid.weights();
        let mut b = DMatrix::zeros(n, n);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(i, i)] = d_i * kd[i] + w[i] * q.denominator[i];
            a[(i, i)] = w[i] * q.numerator[i];
            if i + 1 < n {
                b[(i, i + 1)] = d_i * ko[i];
                b[(i + 1, i)] = d_i * ko[i];
            }
        }
        let l = b.cholesky().unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let c = &linv * a * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        q.scale * c.symmetric_eigen().eigenvalues.max()
    }

    #[test]
    fn dfe_constant_lambda() {
        let g = Grid::unit(50).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for d in [1e-6, 0.1, 10.0] {
            let s = solve_dfe(d, &c, &g).unwrap();
            assert!(s.dist_inf(&g.constant(3.0)).unwrap() < 1e-12);
        }
        assert!(solve_dfe(0.0, &c, &g).is_err());
    }

    #[test]
    fn dfe_mass_identity_and_small_diffusion() {
        let g = Grid::unit(400).unwrap();
        let c = from_expressions(&g, "2 + cos(2*pi*x)", "1", "1", "1", None).unwrap();
        let lam_int = g.integrate(&c.lambda).unwrap();
        for d in [1.0, 1e-2, 1e-4, 1e-6] {
            let s = solve_dfe(d, &c, &g).unwrap();
            let diff = g.integrate(&c.lambda.zip_map(&s, |a, b| a - b).unwrap()).unwrap();
            assert!(diff.abs() <= 1e-11 * lam_int, "{diff}");
        }
        let errs: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&d| solve_dfe(d, &c, &g).unwrap().dist_inf(&c.lambda).unwrap())
            .collect();
        assert!(errs.windows(2).all(|p| p[1] < p[0]), "{errs:?}");
        assert!(errs[3] <= 0.05);
    }

    #[test]
    fn eigenpair_constant_potential() {
        let g = Grid::unit(64).unwrap();
        let e = principal_eigenpair(0.7, &g.constant(2.5), &g).unwrap();
        assert!((e.eigenvalue + 2.5).abs() < 1e-12);
        assert!(e.eigenfunction.dist_inf(&g.constant(1.0)).unwrap() < 1e-10);
        let hom = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let e = lambda_star(ModelKind::MW, 1.0, 1.0, &hom, &g).unwrap();
        assert!((e.eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_matches_cosine_mode() {
        // potential 0: second eigenvalue would be d π²; check the principal
        // one for a shifted cosine potential against dense eigen-solve
        let g = Grid::unit(60).unwrap();
        let p = g.sample(|x| (PI * x).cos() * 2.0);
        let e = principal_eigenpair(0.3, &p, &g).unwrap();
        let n = g.n_nodes();
        let lap = g.laplacian();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let (l, d, u) = lap.row(i);
            m[(i, i)] = -0.3 * d - p[i];
            if i > 0 {
                m[(i, i - 1)] = -0.3 * l;
            }
            if i + 1 < n {
                m[(i, i + 1)] = -0.3 * u;
            }
        }
        let ev = m.complex_eigenvalues();
        let min = ev.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        assert!((e.eigenvalue - min).abs() < 1e-9, "{} {}", e.eigenvalue, min);
        assert!(e.eigenfunction.min() > 0.0);
        assert!((e.eigenfunction.max() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalue_monotone_in_potential() {
        let g = Grid::unit(80).unwrap();
        for k in 0..10 {
            let p = g.sample(|x| (k as f64 * x).sin() + 0.3 * x);
            let bump = g.sample(|x| 0.1 + 0.05 * (3.0 * x + k as f64).cos());
            let p2 = p.zip_map(&bump, |a, b| a + b).unwrap();
            let l1 = principal_eigenpair(0.05, &p, &g).unwrap().eigenvalue;
            let l2 = principal_eigenpair(0.05, &p2, &g).unwrap().eigenvalue;
            assert!(l2 < l1);
        }
    }

    #[test]
    fn r0_homogeneous() {
        let g = Grid::unit(64).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        for d in [1e-3, 1.0, 1e3] {
            let r = compute_r0(ModelKind::MW, d, 0.5, &c, &g).unwrap();
            assert!((r.value - 1.5).abs() < 1e-12, "{d}: {}", r.value);
        }
        let c = preset_homogeneous(&g, 3.0, 0.5, 1.0, 1.0).unwrap();
        assert!((compute_r0(ModelKind::MW, 1.0, 1.0, &c, &g).unwrap().value - 0.75).abs() < 1e-12);
        let (lo, hi) = r0_limits(ModelKind::MW, 1.0, &preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap(), &g).unwrap();
        assert!((lo - 1.5).abs() < 1e-13 && (hi - 1.5).abs() < 1e-13, "{lo} {hi}");
    }

    #[test]
    fn r0_matches_dense_oracle() {
        let g = Grid::unit(120).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for kind in ModelKind::ALL {
            for d in [1e-3, 0.1, 10.0] {
                let q = Quotient::for_model(kind, 0.3, &c, &g).unwrap();
                let r = compute_r0(kind, d, 0.3, &c, &g).unwrap();
                let oracle = dense_r0(&q, d, &g);
                assert!((r.value - oracle).abs() <= 1e-10 * oracle, "{kind} {d}: {} vs {oracle}", r.value);
                let rq = q.evaluate(d, &r.maximizer, &g).unwrap();
                assert!((rq - r.value).abs() <= 1e-10 * r.value);
                assert!(r.maximizer.min() > 0.0);
            }
        }
    }

    #[test]
    fn r0_fig0a_examples() {
        let g = Grid::unit(400).unwrap();
        let c = preset_fig0a(&g).unwrap();
        for d in [1e-2, 1.0, 1e2] {
            let so = compute_r0(ModelKind::SO, d, 1.0, &c, &g).unwrap().value;
            let mo = compute_r0(ModelKind::MO, d, 1.0, &c, &g).unwrap().value;
            assert!(so > 1.25);
            assert_eq!(so, mo);
        }
        let (_, hi) = r0_limits(ModelKind::SO, 1.0, &c, &g).unwrap();
        assert!((hi - 1.25).abs() < 1e-12);
        let (lo, _) = r0_limits(ModelKind::MW, 1e-3, &c, &g).unwrap();
        let r = compute_r0(ModelKind::MW, 1e-6, 1e-3, &c, &g).unwrap().value;
        assert!((r - lo).abs() <= 0.02 * lo);
    }

    #[test]
    fn only_mw_depends_on_ds() {
        let g = Grid::unit(100).unwrap();
        let c = from_expressions(&g, "2 + cos(2*pi*x)", "1.5 + sin(2*pi*x)", "1.2 + cos(2*pi*x)", "0.5 + x", Some(1.0)).unwrap();
        for kind in [ModelKind::MO, ModelKind::SO, ModelKind::SW] {
            let v: Vec<f64> = [0.1, 1.0, 10.0]
                .iter()
                .map(|&ds| compute_r0(kind, 0.5, ds, &c, &g).unwrap().value)
                .collect();
            assert!(v[0] == v[1] && v[1] == v[2]);
        }
        let a = compute_r0(ModelKind::MW, 0.5, 0.1, &c, &g).unwrap().value;
        let b = compute_r0(ModelKind::MW, 0.5, 10.0, &c, &g).unwrap().value;
        assert!((a - b).abs() > 1e-6);
    }

    fn threshold_coeffs(g: &Grid) -> CoefficientSet {
        // βS̃ = 3 + 2.7 sin 2πx, γ + μ = 3.5: sign-changing, ∫βS̃ = 3 < 3.5
        from_expressions(g, "3", "1 + 0.9*sin(2*pi*x)", "1", "2.5", None).unwrap()
    }

    #[test]
    fn threshold_diffusivity() {
        let g = Grid::unit(200).unwrap();
        let c = threshold_coeffs(&g);
        // dense scan first: R0 decreasing and crossing 1 once
        let ds: Vec<f64> = (-40..=40).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        let rs: Vec<f64> = ds.iter().map(|&d| compute_r0(ModelKind::MW, d, 1.0, &c, &g).unwrap().value).collect();
        assert!(rs.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        let crossings = rs.windows(2).filter(|p| (p[0] - 1.0) * (p[1] - 1.0) < 0.0).count();
        assert_eq!(crossings, 1);

        let dstar = find_threshold_di(ModelKind::MW, 1.0, &c, &g, None).unwrap();
        let r = compute_r0(ModelKind::MW, dstar, 1.0, &c, &g).unwrap().value;
        assert!((r - 1.0).abs() <= 1e-8);
        let lam = lambda_star(ModelKind::MW, dstar, 1.0, &c, &g).unwrap().eigenvalue;
        assert!(lam.abs() <= 1e-6, "{lam}");
        let k = rs.iter().position(|&r| r < 1.0).unwrap();
        assert!(ds[k - 1] <= dstar && dstar <= ds[k]);

        let bracketed = find_threshold_di(ModelKind::MW, 1.0, &c, &g, Some((ds[k - 1], ds[k]))).unwrap();
        assert!((bracketed / dstar - 1.0).abs() < 1e-6);
        assert!(find_threshold_di(ModelKind::MW, 1.0, &c, &g, Some((ds[k], ds[k + 1]))).is_err());
    }

    #[test]
    fn threshold_refused_when_always_endemic() {
        let g = Grid::unit(40).unwrap();
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        let e = find_threshold_di(ModelKind::MW, 1.0, &c, &g, None).unwrap_err();
        assert!(matches!(e, Error::Hypothesis(ref m) if m.contains("R0 > 1 for all d_I")), "{e}");
    }

    #[test]
    fn sign_agreement_random() {
        let g = Grid::unit(100).unwrap();
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let (a, b, ph) = (0.6 + 2.0 * rnd(), 0.9 * rnd(), 6.0 * rnd());
            let c = from_expressions(
                &g,
                &format!("{a} + 0.5*cos(2*pi*x + {ph})"),
                &format!("1 + {b}*sin(2*pi*x)"),
                &format!("{}", 0.3 + rnd()),
                &format!("{}", 0.2 + rnd()),
                Some(0.5 + rnd()),
            )
            .unwrap();
            for kind in ModelKind::ALL {
                for d in [0.01, 0.1, 1.0, 10.0] {
                    let r = compute_r0(kind, d, 0.7, &c, &g).unwrap().value;
                    if (r - 1.0).abs() <= 1e-6 {
                        continue;
                    }
                    let lam = lambda_star(kind, d, 0.7, &c, &g).unwrap().eigenvalue;
                    assert_eq!((r - 1.0).signum(), -lam.signum(), "{kind} d={d} R0={r} λ={lam}");
                }
            }
        }
    }

    #[test]
    fn parallel_curve_matches_pointwise() {
        let g = Grid::unit(100).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let d_is = [10.0, 1.0, 0.1, 0.01];
        let curve = r0_curve(ModelKind::SW, &d_is, 1.0, &c, &g).unwrap();
        for (r, &d) in curve.iter().zip(&d_is) {
            assert_eq!(r.d_i, d);
            assert_eq!(r.value, compute_r0(ModelKind::SW, d, 1.0, &c, &g).unwrap().value);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn r0_nonincreasing_in_di(a in 0.5f64..3.0, b in 0.0f64..0.9, g0 in 0.3f64..2.0, ph in 0.0f64..6.0) {
            let g = Grid::unit(60).unwrap();
            let c = from_expressions(
                &g,
                &format!("{a} + 0.4*cos(2*pi*x + {ph})"),
                &format!("1 + {b}*sin(2*pi*x)"),
                &format!("{g0}"),
                "0.5",
                Some(1.0),
            ).unwrap();
            for kind in ModelKind::ALL {
                let mut prev = f64::INFINITY;
                for k in -6..=3 {
                    let r = compute_r0(kind, 10f64.powi(k), 0.5, &c, &g).unwrap().value;
                    proptest::prop_assert!(r <= prev * (1.0 + 1e-12), "{} at 1e{}: {} > {}", kind, k, r, prev);
                    prev = r;
                }
            }
        }
    }
}

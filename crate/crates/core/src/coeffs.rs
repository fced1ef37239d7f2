//! Coefficient fields `Λ, β, γ, μ` (plus the conserved total `N`), the
//! presets used by the figure scenarios, user-supplied coefficients, and
//! risk-site classification.

use std::f64::consts::PI;
use std::path::Path;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables,
    DefaultNumericTypes, Function, HashMapContext, Value,
};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Default tolerance for deciding `β = γ` at a node.
pub const MODERATE_TOL: f64 = 1e-9;

/// Coefficients at a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoeffs {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub lambda: Field,
    pub beta: Field,
    pub gamma: Field,
    pub mu: Field,
    /// Conserved total `N` for the models without recruitment.
    pub total_mass: Option<f64>,
}

impl CoefficientSet {
    /// Builds and validates a set; every field must be strictly positive.
    pub fn new(
        grid: &Grid,
        lambda: Field,
        beta: Field,
        gamma: Field,
        mu: Field,
        total_mass: Option<f64>,
    ) -> Result<Self> {
        for (name, f) in [("lambda", &lambda), ("beta", &beta), ("gamma", &gamma), ("mu", &mu)] {
            grid.check(f)?;
            if let Some(i) = f.values().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::validation(format!(
                    "{name} must be strictly positive, found {} at node {i}",
                    f[i]
                )));
            }
        }
        if let Some(n) = total_mass {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::validation(format!("total mass must be positive, got {n}")));
            }
        }
        Ok(CoefficientSet {
            lambda,
            beta,
            gamma,
            mu,
            total_mass,
        })
    }

    pub fn with_total_mass(mut self, n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::validation(format!("total mass must be positive, got {n}")));
        }
        self.total_mass = Some(n);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.beta.len()
    }

    #[inline]
    pub fn at(&self, i: usize) -> NodeCoeffs {
        NodeCoeffs {
            lambda: self.lambda[i],
            beta: self.beta[i],
            gamma: self.gamma[i],
            mu: self.mu[i],
        }
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.total_mass
            .ok_or_else(|| Error::validation("conserved-mass model requires total_mass (N)"))
    }

    /// True when all four fields are constant across nodes.
    pub fn is_homogeneous(&self) -> bool {
        [&self.lambda, &self.beta, &self.gamma, &self.mu]
            .iter()
            .all(|f| f.max() - f.min() <= 1e-14 * f.max().abs())
    }

    /// Constant values when homogeneous.
    pub fn homogeneous_values(&self) -> Result<NodeCoeffs> {
        if !self.is_homogeneous() {
            return Err(Error::validation(
                "formula is only valid for spatially homogeneous coefficients",
            ));
        }
        Ok(self.at(0))
    }
}

/// `β = 1.5 + sin 2πx`, `γ = 1.2 + cos 2πx`, `Λ = 3`, `μ = 0.5 + x`, `N = 1`.
pub fn preset_fig0a(grid: &Grid) -> Result<CoefficientSet> {
    CoefficientSet::new(
        grid,
        grid.constant(3.0),
        grid.sample(|x| 1.5 + (2.0 * PI * x).sin()),
        grid.sample(|x| 1.2 + (2.0 * PI * x).cos()),
        grid.sample(|x| 0.5 + x),
        Some(1.0),
    )
}

/// Piecewise-linear `β, γ` with `β = γ` on `[0.25, 0.75]`; `Λ = 3`,
/// `μ = 0.5 + x`, `N = 1`. Needs `n_cells % 4 == 0` so the breakpoints are nodes.
pub fn preset_moderate(grid: &Grid) -> Result<CoefficientSet> {
    if !grid.n_cells().is_multiple_of(4) {
        return Err(Error::validation(format!(
            "moderate-risk preset needs n_cells divisible by 4 so that the breakpoints \
             0.25 and 0.75 are grid nodes (got {})",
            grid.n_cells()
        )));
    }
    let n = grid.n_cells();
    // evaluate from the node index so the breakpoints are hit exactly
    let x_of = |i: usize| i as f64 / n as f64;
    let beta: Vec<f64> = (0..=n)
        .map(|i| if 4 * i <= 3 * n { 1.0 } else { 2.0 * x_of(i) - 0.5 })
        .collect();
    let gamma: Vec<f64> = (0..=n)
        .map(|i| if 4 * i <= n { -2.0 * x_of(i) + 1.5 } else { 1.0 })
        .collect();
    CoefficientSet::new(
        grid,
        grid.constant(3.0),
        grid.field(beta)?,
        grid.field(gamma)?,
        grid.sample(|x| 0.5 + x),
        Some(1.0),
    )
}

/// Constant coefficients; `N` defaults to `Λ |Ω|`.
pub fn preset_homogeneous(grid: &Grid, lambda: f64, beta: f64, gamma: f64, mu: f64) -> Result<CoefficientSet> {
    for (name, v) in [("lambda", lambda), ("beta", beta), ("gamma", gamma), ("mu", mu)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    CoefficientSet::new(
        grid,
        grid.constant(lambda),
        grid.constant(beta),
        grid.constant(gamma),
        grid.constant(mu),
        Some(lambda * grid.length()),
    )
}

/// Evaluates closed-form expressions in `x` at every node.
///
/// Expressions use the usual arithmetic plus `sin cos tan exp ln sqrt abs
/// min max`, the constant `pi`, and `x` (e.g. `1.5 + sin(2*pi*x)`).
pub fn from_expressions(
    grid: &Grid,
    lambda: &str,
    beta: &str,
    gamma: &str,
    mu: &str,
    total_mass: Option<f64>,
) -> Result<CoefficientSet> {
    let eval = |name: &str, src: &str| -> Result<Field> {
        let tree = build_operator_tree::<DefaultNumericTypes>(src)
            .map_err(|e| Error::validation(format!("cannot parse {name} = {src:?}: {e}")))?;
        let mut ctx = expression_context()?;
        let mut values = Vec::with_capacity(grid.n_nodes());
        for &x in grid.nodes() {
            ctx.set_value("x".into(), Value::from_float(x))
                .map_err(|e| Error::validation(e.to_string()))?;
            let v = tree
                .eval_number_with_context(&ctx)
                .map_err(|e| Error::validation(format!("cannot evaluate {name} at x = {x}: {e}")))?;
            values.push(v);
        }
        grid.field(values)
    };
    CoefficientSet::new(
        grid,
        eval("lambda", lambda)?,
        eval("beta", beta)?,
        eval("gamma", gamma)?,
        eval("mu", mu)?,
        total_mass,
    )
}

fn expression_context() -> Result<HashMapContext<DefaultNumericTypes>> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let err = |e: evalexpr::EvalexprError<DefaultNumericTypes>| Error::validation(e.to_string());
    ctx.set_value("pi".into(), Value::from_float(PI)).map_err(err)?;
    let unary: [(&str, fn(f64) -> f64); 8] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("tanh", f64::tanh),
    ];
    for (name, f) in unary {
        ctx.set_function(
            name.into(),
            Function::new(move |arg| Ok(Value::from_float(f(arg.as_number()?)))),
        )
        .map_err(err)?;
    }
    let binary: [(&str, fn(f64, f64) -> f64); 2] = [("min", f64::min), ("max", f64::max)];
    for (name, f) in binary {
        ctx.set_function(
            name.into(),
            Function::new(move |arg| {
                let t = arg.as_fixed_len_tuple(2)?;
                Ok(Value::from_float(f(t[0].as_number()?, t[1].as_number()?)))
            }),
        )
        .map_err(err)?;
    }
    Ok(ctx)
}

/// Reads a CSV with header `x,lambda,beta,gamma,mu`, one row per grid node.
pub fn from_csv(grid: &Grid, path: &Path, total_mass: Option<f64>) -> Result<CoefficientSet> {
    let file = std::fs::File::open(path)?;
    from_csv_reader(grid, file, total_mass)
}

pub fn from_csv_reader<R: std::io::Read>(grid: &Grid, reader: R, total_mass: Option<f64>) -> Result<CoefficientSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != ["x", "lambda", "beta", "gamma", "mu"] {
        return Err(Error::validation(format!(
            "coefficient CSV header must be x,lambda,beta,gamma,mu (got {})",
            header.join(",")
        )));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::validation(format!("row {row}: missing column {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::validation(format!("row {row}: {e}")))
        };
        if row >= grid.n_nodes() {
            return Err(Error::validation(format!(
                "coefficient CSV has more rows than the grid's {} nodes",
                grid.n_nodes()
            )));
        }
        let x = parse(0)?;
        if (x - grid.nodes()[row]).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "row {row}: x = {x} does not match grid node {}",
                grid.nodes()[row]
            )));
        }
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(parse(k + 1)?);
        }
    }
    let [l, b, g, m] = cols;
    CoefficientSet::new(grid, grid.field(l)?, grid.field(b)?, grid.field(g)?, grid.field(m)?, total_mass)
}

/// Node sets of low-, high- and moderate-risk sites.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RiskClassification {
    pub low_risk: Vec<usize>,
    pub high_risk: Vec<usize>,
    pub moderate: Vec<usize>,
}

impl RiskClassification {
    pub fn is_high(&self, i: usize) -> bool {
        self.high_risk.binary_search(&i).is_ok()
    }
}

/// Node `i` is moderate when `|β_i - γ_i| <= tolerance`, otherwise low or
/// high risk by the sign of `β_i - γ_i`.
pub fn classify_risk(coeffs: &CoefficientSet, tolerance: f64) -> RiskClassification {
    let mut out = RiskClassification::default();
    for i in 0..coeffs.n_nodes() {
        let diff = coeffs.beta[i] - coeffs.gamma[i];
        if diff.abs() <= tolerance {
            out.moderate.push(i);
        } else if diff > 0.0 {
            out.high_risk.push(i);
        } else {
            out.low_risk.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig0a_values() {
        let g = Grid::unit(400).unwrap();
        let c = preset_fig0a(&g).unwrap();
        let a = c.at(0);
        assert_eq!((a.beta, a.gamma, a.lambda, a.mu), (1.5, 2.2, 3.0, 0.5));
        let q = c.at(100);
        assert!((q.beta - 2.5).abs() < 1e-15);
        assert!((q.gamma - 1.2).abs() < 1e-15);
        assert!((c.beta.min() - 0.5).abs() < 1e-12);
        assert!((c.gamma.min() - 0.2).abs() < 1e-12);
        assert_eq!(c.total_mass, Some(1.0));
        assert!((g.integrate(&c.beta).unwrap() - 1.5).abs() < 1e-12);
        assert!((g.integrate(&c.gamma).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn moderate_values() {
        let g = Grid::unit(400).unwrap();
        let c = preset_moderate(&g).unwrap();
        assert_eq!((c.beta[0], c.gamma[0]), (1.0, 1.5));
        assert_eq!((c.beta[200], c.gamma[200]), (1.0, 1.0));
        assert_eq!((c.beta[400], c.gamma[400]), (1.5, 1.0));
        assert_eq!((c.beta[300], c.gamma[100]), (1.0, 1.0));
        assert!(matches!(preset_moderate(&Grid::unit(402).unwrap()), Err(Error::Validation(m)) if m.contains("divisible by 4")));
    }

    #[test]
    fn homogeneous_validation() {
        let g = Grid::unit(8).unwrap();
        assert!(preset_homogeneous(&g, 1.0, 1.0, 1.0, -1.0).is_err());
        let c = preset_homogeneous(&g, 3.0, 1.0, 1.0, 1.0).unwrap();
        assert!(c.is_homogeneous());
        assert!(!preset_fig0a(&g).unwrap().is_homogeneous());
    }

    #[test]
    fn risk_sets() {
        let g = Grid::unit(400).unwrap();
        let r = classify_risk(&preset_fig0a(&g).unwrap(), MODERATE_TOL);
        assert!(!r.low_risk.is_empty() && !r.high_risk.is_empty());

        let r = classify_risk(&preset_moderate(&g).unwrap(), 1e-12);
        assert_eq!(r.moderate, (100..=300).collect::<Vec<_>>());
        assert!(r.high_risk.iter().all(|&i| i > 300));
        assert!(r.low_risk.iter().all(|&i| i < 100));

        let r = classify_risk(&preset_homogeneous(&g, 1.0, 2.0, 1.0, 1.0).unwrap(), 1e-9);
        assert_eq!(r.high_risk.len(), 401);
    }

    #[test]
    fn expressions_match_preset() {
        let g = Grid::unit(64).unwrap();
        let c = from_expressions(&g, "3", "1.5 + sin(2*pi*x)", "1.2 + cos(2*pi*x)", "0.5 + x", Some(1.0)).unwrap();
        let p = preset_fig0a(&g).unwrap();
        assert!(c.beta.dist_inf(&p.beta).unwrap() < 1e-14);
        assert!(c.gamma.dist_inf(&p.gamma).unwrap() < 1e-14);
        assert!(c.mu.dist_inf(&p.mu).unwrap() < 1e-14);
        let e = from_expressions(&g, "3", "sin(2*pi*x)", "1", "1", None).unwrap_err();
        assert!(e.to_string().contains("strictly positive"));
        assert!(from_expressions(&g, "3", "1 +", "1", "1", None).is_err());
        let m = from_expressions(&g, "max(1, 2*x)", "1", "1", "1", None).unwrap();
        assert_eq!(m.lambda[64], 2.0);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let g = Grid::unit(4).unwrap();
        let mut text = String::from("x,lambda,beta,gamma,mu\n");
        for &x in g.nodes() {
            text.push_str(&format!("{x},3,{},1,0.5\n", 1.0 + x));
        }
        let c = from_csv_reader(&g, text.as_bytes(), None).unwrap();
        assert_eq!(c.beta[4], 2.0);
        let bad = text.replace("0.75,", "0.7,");
        assert!(from_csv_reader(&g, bad.as_bytes(), None).is_err());
        let neg = text.replace(",0.5\n", ",-0.5\n");
        assert!(from_csv_reader(&g, neg.as_bytes(), None).is_err());
        assert!(from_csv_reader(&g, "a,b\n1,2\n".as_bytes(), None).is_err());
    }

    proptest! {
        #[test]
        fn classification_partitions(tol in 0.0f64..0.5, seed in 0u64..1000) {
            let g = Grid::unit(40).unwrap();
            let phase = seed as f64 * 0.01;
            let c = from_expressions(&g, "1", &format!("1.2 + sin(6*x + {phase})"), "1.2 + 0.5*cos(3*x)", "1", None).unwrap();
            let r = classify_risk(&c, tol);
            let mut all: Vec<usize> = r.low_risk.iter().chain(&r.high_risk).chain(&r.moderate).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..=40).collect::<Vec<_>>());
        }
    }
}

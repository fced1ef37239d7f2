//! Small dense-free linear algebra: tridiagonal solves, the smallest
//! eigenpair of a symmetric tridiagonal matrix, and banded LU with partial
//! pivoting.

use crate::error::{Error, Result};

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored),
/// `upper[i]` multiplies `x[i+1]` (`upper[n-1]` ignored). Intended for
/// diagonally dominant matrices, where no pivoting is needed.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Singular(0));
    }
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Singular(i));
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert_eq!(off.len() + 1, diag.len());
        SymTridiagonal { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x` (Sturm count from the LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let denom = if q == 0.0 { f64::EPSILON * (self.off[i - 1].abs() + 1e-300) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Smallest eigenvalue by Sturm bisection, to full working precision.
    pub fn smallest_eigenvalue(&self) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Smallest eigenpair: Sturm bisection for the eigenvalue, then inverse
    /// iteration with a shift just below it (so the shifted matrix stays
    /// positive definite and Thomas elimination is safe). The returned
    /// eigenvalue is the Rayleigh quotient of the final vector.
    pub fn smallest_eigenpair(&self, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>, usize)> {
        let n = self.dim();
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
        let lambda0 = self.smallest_eigenvalue();
        let shift = lambda0 - 64.0 * f64::EPSILON * scale;
        let sub: Vec<f64> = std::iter::once(0.0).chain(self.off.iter().copied()).collect();
        let sup: Vec<f64> = self.off.iter().copied().chain(std::iter::once(0.0)).collect();
        let shifted: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda: f64;
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let mut y = solve_tridiagonal(&sub, &shifted, &sup, &v)?;
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::NoConvergence {
                    solver: "inverse iteration",
                    iterations: it,
                    residual,
                });
            }
            y.iter_mut().for_each(|a| *a /= norm);
            let ty = self.mul(&y);
            lambda = y.iter().zip(&ty).map(|(a, b)| a * b).sum();
            residual = ty
                .iter()
                .zip(&y)
                .map(|(t, a)| (t - lambda * a).abs())
                .fold(0.0, f64::max);
            v = y;
            if residual <= tol * scale {
                return Ok((lambda, v, it));
            }
        }
        Err(Error::NoConvergence {
            solver: "inverse iteration",
            iterations: max_iter,
            residual: residual / scale,
        })
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, factorized in
/// place by Gaussian elimination with partial pivoting (row interchanges
/// restricted to the band, so `kl` extra super-diagonals of fill are kept).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`, which must lie within the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.n {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Column `j` scaled in place by `s` (used for change of variables).
    pub fn scale_column(&mut self, j: usize, s: f64) {
        let lo = j.saturating_sub(self.ku);
        let hi = (j + self.kl).min(self.n - 1);
        for i in lo..=hi {
            let k = self.idx(i, j);
            self.data[k] *= s;
        }
    }

    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut colmax = 0.0f64;
        for v in &self.data {
            colmax = colmax.max(v.abs());
        }
        let tiny = colmax * f64::EPSILON * 1e-6;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if best <= tiny || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let irk = self.idx(r, k);
                let m = self.data[irk] / pivot;
                self.data[irk] = m;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let (a, b) = (self.idx(r, j), self.idx(k, j));
                        self.data[a] -= m * self.data[b];
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                rhs.swap(k, p);
            }
            let last_row = (k + a.kl).min(n - 1);
            for r in k + 1..=last_row {
                rhs[r] -= a.data[a.idx(r, k)] * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + a.kl + a.ku).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=last_col {
                s -= a.data[a.idx(k, j)] * rhs[j];
            }
            rhs[k] = s / a.data[a.idx(k, k)];
        }
    }
}

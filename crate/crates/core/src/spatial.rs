//! Uniform grid on `[0, 1]`, the three-point Laplacian with homogeneous
//! Dirichlet data, h-weighted inner products and a Thomas solver.

use crate::error::{Error, Result};

/// Interior nodes `x_k = k h`, `k = 1..=n`, with `h = 1 / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs at least one interior node".into()));
        }
        Ok(Self {
            n,
            h: 1.0 / (n + 1) as f64,
        })
    }

    /// Grid from a mesh step; `1 / h` must be an integer to within 1e-9.
    pub fn from_step(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidArgument(format!("mesh step {h} must lie in (0, 1)")));
        }
        let cells = 1.0 / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded || rounded < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "mesh step {h} does not divide [0, 1] into an integer number of cells"
            )));
        }
        Self::new(rounded as usize - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `k` (1-based).
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Interior node coordinates in order.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n).map(move |k| self.node(k))
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        Ok(())
    }

    /// `h Σ y_k z_k`.
    pub fn inner(&self, y: &[f64], z: &[f64]) -> Result<f64> {
        self.check(y)?;
        self.check(z)?;
        Ok(self.h * dot(y, z))
    }

    pub fn norm(&self, y: &[f64]) -> Result<f64> {
        Ok(self.inner(y, y)?.sqrt())
    }

    /// `sqrt((D y, y))` for a symmetric positive definite `D`.
    pub fn a_norm(&self, op: &TridiagonalOperator, y: &[f64]) -> Result<f64> {
        let dy = op.apply(y)?;
        Ok(self.inner(&dy, y)?.max(0.0).sqrt())
    }
}

pub(crate) fn dot(y: &[f64], z: &[f64]) -> f64 {
    y.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// Square tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalOperator {
    /// `sub` and `sup` have length `diag.len() - 1`.
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty tridiagonal operator".into()));
        }
        for off in [&sub, &sup] {
            if off.len() + 1 != diag.len() {
                return Err(Error::DimensionMismatch {
                    expected: diag.len() - 1,
                    found: off.len(),
                });
            }
        }
        Ok(Self { sub, diag, sup })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            vec![0.0; n.saturating_sub(1)],
            vec![1.0; n],
            vec![0.0; n.saturating_sub(1)],
        )
    }

    /// `A y = -(y(x+h) - 2 y(x) + y(x-h)) / h²` with `y = 0` off the grid.
    pub fn laplacian(grid: &Grid1D) -> Self {
        let n = grid.n();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        Self {
            sub: vec![-inv_h2; n - 1],
            diag: vec![2.0 * inv_h2; n],
            sup: vec![-inv_h2; n - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    /// `a I + b self`.
    pub fn shifted(&self, identity_coeff: f64, self_coeff: f64) -> Self {
        Self {
            sub: self.sub.iter().map(|v| self_coeff * v).collect(),
            diag: self.diag.iter().map(|v| identity_coeff + self_coeff * v).collect(),
            sup: self.sup.iter().map(|v| self_coeff * v).collect(),
        }
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(y, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: out.len(),
            });
        }
        for k in 0..n {
            let mut acc = self.diag[k] * y[k];
            if k > 0 {
                acc += self.sub[k - 1] * y[k - 1];
            }
            if k + 1 < n {
                acc += self.sup[k] * y[k + 1];
            }
            out[k] = acc;
        }
        Ok(())
    }

    /// Thomas elimination without pivoting. A pivot smaller than 1e-14
    /// times its row scale is reported as a breakdown.
    pub fn factor(&self) -> Result<TridiagonalFactor> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let mut pivot = self.diag[k];
            if k > 0 {
                pivot -= self.sub[k - 1] * upper[k - 1];
            }
            let mut scale = self.diag[k].abs();
            if k > 0 {
                scale = scale.max(self.sub[k - 1].abs());
            }
            if k + 1 < n {
                scale = scale.max(self.sup[k].abs());
            }
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::SolverBreakdown { row: k, pivot });
            }
            if k + 1 < n {
                upper.push(self.sup[k] / pivot);
            }
            pivots.push(pivot);
        }
        Ok(TridiagonalFactor {
            sub: self.sub.clone(),
            pivots,
            upper,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }
}

/// LU factors of a tridiagonal matrix from [`TridiagonalOperator::factor`].
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalFactor {
    sub: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalFactor {
    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut y = rhs.to_vec();
        self.solve_in_place(&mut y)?;
        Ok(y)
    }

    pub fn solve_in_place(&self, y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        y[0] /= self.pivots[0];
        for k in 1..n {
            y[k] = (y[k] - self.sub[k - 1] * y[k - 1]) / self.pivots[k];
        }
        for k in (0..n - 1).rev() {
            y[k] -= self.upper[k] * y[k + 1];
        }
        Ok(())
    }
}

/// Eigenvalue `(4 / h²) sin²(k π h / 2)` of the grid Laplacian, `k = 1..=n`.
pub fn laplacian_eigenvalue(grid: &Grid1D, k: usize) -> f64 {
    let h = grid.h();
    let s = (k as f64 * std::f64::consts::PI * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

/// Node values of `sin(k π x)`.
pub fn sine_mode(grid: &Grid1D, k: usize) -> Vec<f64> {
    grid.nodes()
        .map(|x| (k as f64 * std::f64::consts::PI * x).sin())
        .collect()
}

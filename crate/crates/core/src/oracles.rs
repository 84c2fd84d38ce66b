//! Reference solvers built independently of the eliminated scheme.
//!
//! * [`volterra_solve`] discretizes the nonlocal equation directly, keeping
//!   the whole solution history and evaluating the memory integrals by a
//!   left-rectangle product rule.
//! * [`ModalProblem`] solves one Laplacian eigenmode of the single-term
//!   (`m, l <= 1`) unforced system exactly.
//! * [`dense_block_step`] solves the weighted scheme's coupled equations for
//!   `(u, v, w)` as one dense linear system, without eliminating anything.

use nalgebra::{Complex, DMatrix, DVector};

use crate::diagnostics::{level_discrepancy, Discrepancy};
use crate::error::{Error, Result};
use crate::kernels::KernelPair;
use crate::scheme::{initialize, step_count, ProblemSpec, SchemeConfig, State, Trajectory};
use crate::spatial::{laplacian_eigenvalue, Grid1D};

/// Largest grid accepted by the dense block oracle.
pub const DENSE_BLOCK_MAX_NODES: usize = 64;

/// Backward-Euler solution of the nonlocal equation
///
/// ```text
/// du/dt + d/dt ∫ β(t-s) u(s) ds + A u + ∫ α(t-s) A u(s) ds = f
/// ```
///
/// with both history integrals taken over all stored levels, `u` frozen at
/// the left end of each sub-interval and the kernel integrated exactly.
/// The source is sampled at the new level. Work grows quadratically with
/// the number of steps.
pub fn volterra_solve(problem: &ProblemSpec, tau: f64) -> Result<Trajectory> {
    let steps = step_count(problem.horizon(), tau)?;
    let grid = problem.grid();
    let n = grid.n();
    let a = problem.laplacian();
    let kernels = problem.kernels();

    // weight of u^k in the integral up to t^{k+j+1}
    let flux_w: Vec<f64> = (0..steps)
        .map(|j| kernels.flux.integral(j as f64 * tau, (j + 1) as f64 * tau))
        .collect();
    let cap_w: Vec<f64> = (0..steps)
        .map(|j| kernels.capacity.integral(j as f64 * tau, (j + 1) as f64 * tau))
        .collect();

    let system = a.shifted(1.0, tau).factor()?;
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    history.push(problem.u0().to_vec());
    let mut states = Vec::with_capacity(steps + 1);
    states.push(State {
        t: 0.0,
        u: problem.u0().to_vec(),
        v: vec![],
        w: vec![],
    });

    let mut flux_hist = vec![0.0; n];
    let mut cap_incr = vec![0.0; n];
    for step in 0..steps {
        let t_next = (step + 1) as f64 * tau;
        flux_hist.iter_mut().for_each(|x| *x = 0.0);
        cap_incr.iter_mut().for_each(|x| *x = 0.0);
        for (k, u) in history.iter().enumerate() {
            let lag = step - k;
            let fw = flux_w[lag];
            // W^{n+1} - W^n picks up w_{lag} and loses w_{lag-1}
            let cw = cap_w[lag] - if lag > 0 { cap_w[lag - 1] } else { 0.0 };
            if fw != 0.0 || cw != 0.0 {
                for i in 0..n {
                    flux_hist[i] += fw * u[i];
                    cap_incr[i] += cw * u[i];
                }
            }
        }
        let a_flux = a.apply(&flux_hist)?;
        let f = problem.source().eval(t_next, grid)?;
        let current = &history[step];
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| current[i] - cap_incr[i] - tau * a_flux[i] + tau * f[i])
            .collect();
        system.solve_in_place(&mut rhs)?;
        states.push(State {
            t: t_next,
            u: rhs.clone(),
            v: vec![],
            w: vec![],
        });
        history.push(rhs);
    }
    Ok(Trajectory { states })
}

/// One unforced eigenmode of the single-term memory system:
///
/// ```text
/// du/dt = -(β + λ) u - α λ v + β ν w,  dv/dt = u - μ v,  dw/dt = u - ν w
/// ```
///
/// with `(u, v, w)(0) = (u0, 0, 0)`. A zero `alpha` or `beta` removes the
/// corresponding auxiliary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalProblem {
    pub lambda: f64,
    pub u0: f64,
    /// `(α, μ)`
    pub flux: Option<(f64, f64)>,
    /// `(β, ν)`
    pub capacity: Option<(f64, f64)>,
}

impl ModalProblem {
    /// Mode `k` of the grid Laplacian with kernels of at most one term each.
    pub fn for_mode(kernels: &KernelPair, grid: &Grid1D, k: usize, u0: f64) -> Result<Self> {
        check_single_term(kernels)?;
        if k == 0 || k > grid.n() {
            return Err(Error::InvalidArgument(format!("mode {k} outside 1..={}", grid.n())));
        }
        let term = |kernel: &crate::kernels::ExpSumKernel| kernel.terms().first().map(|t| (t.weight, t.rate));
        Ok(Self {
            lambda: laplacian_eigenvalue(grid, k),
            u0,
            flux: term(&kernels.flux),
            capacity: term(&kernels.capacity),
        })
    }

    fn system_matrix(&self) -> DMatrix<f64> {
        let dim = 1 + self.flux.is_some() as usize + self.capacity.is_some() as usize;
        let mut m = DMatrix::zeros(dim, dim);
        m[(0, 0)] = -self.lambda;
        let mut row = 1;
        if let Some((alpha, mu)) = self.flux {
            m[(0, row)] = -alpha * self.lambda;
            m[(row, 0)] = 1.0;
            m[(row, row)] = -mu;
            row += 1;
        }
        if let Some((beta, nu)) = self.capacity {
            m[(0, 0)] -= beta;
            m[(0, row)] = beta * nu;
            m[(row, 0)] = 1.0;
            m[(row, row)] = -nu;
        }
        m
    }

    /// Characteristic polynomial `det(sI - M)` (coefficients, lowest first)
    /// and the numerator `Π (s + rate)` of the `u` component's transform.
    fn polynomials(&self) -> (Vec<f64>, Vec<f64>) {
        let beta = self.capacity.map_or(0.0, |c| c.0);
        let flux_factor = self.flux.map_or(vec![1.0], |(_, mu)| vec![mu, 1.0]);
        let cap_factor = self.capacity.map_or(vec![1.0], |(_, nu)| vec![nu, 1.0]);
        let numerator = poly_mul(&flux_factor, &cap_factor);
        let mut charpoly = poly_mul(&[beta + self.lambda, 1.0], &numerator);
        if let Some((alpha, _)) = self.flux {
            poly_add_scaled(&mut charpoly, &cap_factor, alpha * self.lambda);
        }
        if let Some((beta, nu)) = self.capacity {
            poly_add_scaled(&mut charpoly, &flux_factor, -beta * nu);
        }
        (charpoly, numerator)
    }

    /// Precomputes the exact solution for repeated evaluation.
    pub fn solution(&self) -> ModalSolution {
        let matrix = self.system_matrix();
        let (charpoly, numerator) = self.polynomials();
        let dcharpoly = poly_derivative(&charpoly);
        let roots: Vec<Complex<f64>> = matrix
            .complex_eigenvalues()
            .iter()
            .map(|&s| newton_polish(&charpoly, &dcharpoly, s))
            .collect();

        let scale = roots.iter().fold(1.0_f64, |m, s| m.max(s.norm()));
        let mut min_gap = f64::INFINITY;
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                min_gap = min_gap.min((roots[i] - roots[j]).norm());
            }
        }
        if min_gap < 1e-8 * scale {
            return ModalSolution::Exponential { matrix, u0: self.u0 };
        }
        let terms = roots
            .iter()
            .map(|&s| {
                let residue = poly_eval(&numerator, s) / poly_eval(&dcharpoly, s) * self.u0;
                (s, residue)
            })
            .collect();
        ModalSolution::Spectral { terms }
    }
}

/// Closed-form modal solution `u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModalSolution {
    /// `Σ r_k exp(s_k t)` over the distinct roots `s_k`.
    Spectral { terms: Vec<(Complex<f64>, Complex<f64>)> },
    /// `(exp(M t) y0)_u` for nearly defective spectra.
    Exponential { matrix: DMatrix<f64>, u0: f64 },
}

impl ModalSolution {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ModalSolution::Spectral { terms } => terms.iter().map(|&(s, r)| r * (s * t).exp()).sum::<Complex<f64>>().re,
            ModalSolution::Exponential { matrix, u0 } => expm(&(matrix * t))[(0, 0)] * u0,
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, ModalSolution::Spectral { .. })
    }
}

/// `u(t)` of a single mode.
pub fn modal_solve(problem: &ModalProblem, t: f64) -> f64 {
    problem.solution().eval(t)
}

fn check_single_term(kernels: &KernelPair) -> Result<()> {
    if kernels.flux_terms() > 1 || kernels.capacity_terms() > 1 {
        return Err(Error::OraclePrecondition(format!(
            "modal oracle needs at most one term per kernel, got m = {}, l = {}",
            kernels.flux_terms(),
            kernels.capacity_terms()
        )));
    }
    Ok(())
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn poly_add_scaled(p: &mut [f64], q: &[f64], scale: f64) {
    for (a, b) in p.iter_mut().zip(q) {
        *a += scale * b;
    }
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

fn poly_eval(p: &[f64], s: Complex<f64>) -> Complex<f64> {
    p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn newton_polish(p: &[f64], dp: &[f64], mut s: Complex<f64>) -> Complex<f64> {
    for _ in 0..3 {
        let d = poly_eval(dp, s);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly_eval(p, s) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        s -= step;
    }
    s
}

/// Scaling-and-squaring matrix exponential with a degree-(6, 6) Padé
/// approximant.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    const PADE: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let dim = m.nrows();
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings);
    let identity = DMatrix::<f64>::identity(dim, dim);
    let mut power = identity.clone();
    let mut num = identity.clone();
    let mut den = identity.clone();
    for (k, c) in PADE.iter().enumerate().skip(1) {
        power = &power * &a;
        num += &power * *c;
        den += &power * (if k % 2 == 1 { -c } else { *c });
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for small norms");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Discrete sine coefficients `c_k`, `u_j = Σ c_k sin(k π x_j)`.
pub fn sine_coefficients(u: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    let n = grid.n();
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.len(),
        });
    }
    let table = SineTable::new(n);
    Ok((1..=n)
        .map(|k| 2.0 / (n + 1) as f64 * (0..n).map(|j| u[j] * table.get(k, j + 1)).sum::<f64>())
        .collect())
}

struct SineTable {
    n: usize,
    values: Vec<f64>,
}

impl SineTable {
    fn new(n: usize) -> Self {
        // sin(π p / (n + 1)) for p = 0..2(n+1), indexed by (k j) mod 2(n+1)
        let period = 2 * (n + 1);
        let values = (0..period)
            .map(|p| (std::f64::consts::PI * p as f64 / (n + 1) as f64).sin())
            .collect();
        Self { n, values }
    }

    fn get(&self, k: usize, j: usize) -> f64 {
        self.values[(k * j) % (2 * (self.n + 1))]
    }
}

/// Exact semi-discrete heat equation solution `Σ c_k exp(-λ_k t) sin(k π x)`.
pub fn classical_heat_series(u0: &[f64], grid: &Grid1D, t: f64) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let coeffs = sine_coefficients(u0, grid)?;
    let amplitudes: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * (-laplacian_eigenvalue(grid, i + 1) * t).exp())
        .collect();
    Ok(synthesize(&amplitudes, grid))
}

fn synthesize(amplitudes: &[f64], grid: &Grid1D) -> Vec<f64> {
    let table = SineTable::new(grid.n());
    (1..=grid.n())
        .map(|j| {
            amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| a * table.get(i + 1, j))
                .sum()
        })
        .collect()
}

/// Superposition of the exact solutions of the first `modes` sine modes of `u0`.
#[derive(Debug, Clone)]
pub struct ModalSeries {
    grid: Grid1D,
    solutions: Vec<ModalSolution>,
    table: SineTable,
    /// Some dropped mode has a coefficient above 1e-12 of the largest.
    pub truncated: bool,
}

impl ModalSeries {
    pub fn new(problem: &ProblemSpec, modes: usize) -> Result<Self> {
        check_single_term(problem.kernels())?;
        if !problem.source().is_zero() {
            return Err(Error::OraclePrecondition("modal oracle needs a zero source".into()));
        }
        let grid = *problem.grid();
        let modes = modes.clamp(1, grid.n());
        let coeffs = sine_coefficients(problem.u0(), &grid)?;
        let largest = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let dropped = coeffs[modes..].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let truncated = dropped > 1e-12 * largest;
        if truncated {
            log::warn!(
                "modal series truncated at {modes} modes: largest dropped coefficient {dropped:.3e} relative to {largest:.3e}"
            );
        }
        let solutions = (1..=modes)
            .map(|k| ModalProblem::for_mode(problem.kernels(), &grid, k, coeffs[k - 1]).map(|mp| mp.solution()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            solutions,
            table: SineTable::new(grid.n()),
            truncated,
        })
    }

    pub fn modes(&self) -> usize {
        self.solutions.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let amplitudes: Vec<f64> = self.solutions.iter().map(|s| s.eval(t)).collect();
        (1..=self.grid.n())
            .map(|j| {
                amplitudes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * self.table.get(i + 1, j))
                    .sum()
            })
            .collect()
    }
}

impl std::fmt::Debug for SineTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SineTable(n = {})", self.n)
    }
}

impl Clone for SineTable {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            values: self.values.clone(),
        }
    }
}

/// Result of [`modal_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModalComparison {
    /// Worst over every time level.
    pub overall: Discrepancy,
    /// At the final time.
    pub final_level: Discrepancy,
    pub modes: usize,
    pub truncated: bool,
}

/// Compares every level of `trajectory` with the modal superposition.
pub fn modal_compare_trajectory(
    problem: &ProblemSpec,
    trajectory: &Trajectory,
    modes: usize,
) -> Result<ModalComparison> {
    let series = ModalSeries::new(problem, modes)?;
    let grid = problem.grid();
    let mut overall = Discrepancy {
        max_abs: 0.0,
        weighted_l2: 0.0,
    };
    let mut final_level = overall;
    for state in &trajectory.states {
        let d = level_discrepancy(&state.u, &series.eval(state.t), grid)?;
        overall.max_abs = overall.max_abs.max(d.max_abs);
        overall.weighted_l2 = overall.weighted_l2.max(d.weighted_l2);
        final_level = d;
    }
    Ok(ModalComparison {
        overall,
        final_level,
        modes: series.modes(),
        truncated: series.truncated,
    })
}

/// Runs the scheme and compares it with `modes` exact modal solutions.
pub fn modal_compare(problem: &ProblemSpec, config: SchemeConfig, modes: usize) -> Result<ModalComparison> {
    check_single_term(problem.kernels())?;
    if !problem.source().is_zero() {
        return Err(Error::OraclePrecondition("modal oracle needs a zero source".into()));
    }
    let trajectory = crate::scheme::run(problem, config, &mut [])?;
    modal_compare_trajectory(problem, &trajectory, modes)
}

/// One step of the weighted scheme solved as a dense coupled system for
/// `(u, v_1.., w_1..)` at the new level, source sampled at `t + σ τ`.
pub fn dense_block_step(prev: &State, problem: &ProblemSpec, config: SchemeConfig) -> Result<State> {
    let grid = problem.grid();
    let n = grid.n();
    if n > DENSE_BLOCK_MAX_NODES {
        return Err(Error::OraclePrecondition(format!(
            "dense block oracle limited to {DENSE_BLOCK_MAX_NODES} nodes, grid has {n}"
        )));
    }
    let flux = problem.kernels().flux.terms();
    let cap = problem.kernels().capacity.terms();
    if prev.u.len() != n || prev.v.len() != flux.len() || prev.w.len() != cap.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: prev.u.len(),
        });
    }
    let SchemeConfig { sigma, tau } = config;
    let lag = 1.0 - sigma;
    let blocks = 1 + flux.len() + cap.len();
    let size = blocks * n;

    let lap = problem.laplacian();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            lap.diag()[i]
        } else if i == j + 1 {
            lap.sub()[j]
        } else if j == i + 1 {
            lap.sup()[i]
        } else {
            0.0
        }
    });
    let identity = DMatrix::<f64>::identity(n, n);
    let beta_sum: f64 = cap.iter().map(|t| t.weight).sum();

    // implicit part: L y^{n+1}; explicit part: R y^n; L - R = (1/τ) I ... per block row
    let mut lhs = DMatrix::<f64>::zeros(size, size);
    let mut rhs_op = DMatrix::<f64>::zeros(size, size);
    let put = |m: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>| {
        let mut view = m.view_mut((row * n, col * n), (n, n));
        view += block;
    };
    // temperature row
    let uu = &identity * (beta_sum) + &a;
    put(&mut lhs, 0, 0, &(&identity / tau + &uu * sigma));
    put(&mut rhs_op, 0, 0, &(&identity / tau - &uu * lag));
    for (i, term) in flux.iter().enumerate() {
        let c = &a * term.weight;
        put(&mut lhs, 0, 1 + i, &(&c * sigma));
        put(&mut rhs_op, 0, 1 + i, &(-&c * lag));
    }
    for (j, term) in cap.iter().enumerate() {
        let c = &identity * (-term.weight * term.rate);
        put(&mut lhs, 0, 1 + flux.len() + j, &(&c * sigma));
        put(&mut rhs_op, 0, 1 + flux.len() + j, &(-&c * lag));
    }
    // auxiliary rows: (y1 - y0)/τ + rate y_σ - u_σ = 0
    for (b, rate) in flux.iter().chain(cap).map(|t| t.rate).enumerate() {
        let row = 1 + b;
        put(&mut lhs, row, row, &(&identity * (1.0 / tau + sigma * rate)));
        put(&mut rhs_op, row, row, &(&identity * (1.0 / tau - lag * rate)));
        put(&mut lhs, row, 0, &(&identity * -sigma));
        put(&mut rhs_op, row, 0, &(&identity * lag));
    }

    let mut y0 = DVector::<f64>::zeros(size);
    for (b, block) in std::iter::once(&prev.u).chain(&prev.v).chain(&prev.w).enumerate() {
        y0.rows_mut(b * n, n).copy_from_slice(block);
    }
    let mut rhs = rhs_op * y0;
    let phi = problem.source().eval(prev.t + sigma * tau, grid)?;
    for i in 0..n {
        rhs[i] += phi[i];
    }
    let y1 = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::OraclePrecondition("dense block system is singular".into()))?;
    let block = |b: usize| y1.rows(b * n, n).iter().copied().collect::<Vec<f64>>();
    Ok(State {
        t: prev.t + tau,
        u: block(0),
        v: (0..flux.len()).map(|i| block(1 + i)).collect(),
        w: (0..cap.len()).map(|j| block(1 + flux.len() + j)).collect(),
    })
}

/// Full run of [`dense_block_step`].
pub fn dense_block_run(problem: &ProblemSpec, config: SchemeConfig) -> Result<Trajectory> {
    let steps = step_count(problem.horizon(), config.tau)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initialize(problem)?);
    for step in 0..steps {
        let mut next = dense_block_step(&states[step], problem, config)?;
        next.t = (step + 1) as f64 * config.tau;
        states.push(next);
    }
    Ok(Trajectory { states })
}

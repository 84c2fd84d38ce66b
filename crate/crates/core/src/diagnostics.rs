//! Energy norm of the extended state and auditing of the discrete
//! stability bound `||y^n||_* <= ||u0|| + 2 σ Σ τ ||φ^{k+σ}||`.

use crate::error::{Error, Result};
use crate::kernels::KernelPair;
use crate::scheme::{ProblemSpec, SchemeConfig, State, Trajectory};
use crate::spatial::{Grid1D, TridiagonalOperator};

/// Relative slack allowed on the bound in floating point.
pub const BOUND_TOLERANCE: f64 = 1e-10;

/// `||y||_*² = ||u||² + Σ α_i ||v_i||_A² + Σ β_j ν_j ||w_j||²`.
pub fn energy_norm(state: &State, kernels: &KernelPair, laplacian: &TridiagonalOperator, grid: &Grid1D) -> Result<f64> {
    if state.v.len() != kernels.flux_terms() {
        return Err(Error::DimensionMismatch {
            expected: kernels.flux_terms(),
            found: state.v.len(),
        });
    }
    if state.w.len() != kernels.capacity_terms() {
        return Err(Error::DimensionMismatch {
            expected: kernels.capacity_terms(),
            found: state.w.len(),
        });
    }
    let mut sq = grid.inner(&state.u, &state.u)?;
    for (term, v) in kernels.flux.terms().iter().zip(&state.v) {
        let av = laplacian.apply(v)?;
        sq += term.weight * grid.inner(&av, v)?;
    }
    for (term, w) in kernels.capacity.terms().iter().zip(&state.w) {
        sq += term.weight * term.rate * grid.inner(w, w)?;
    }
    Ok(sq.max(0.0).sqrt())
}

/// `||u0|| + 2 σ τ Σ_k ||φ^{k+σ}||` over the source norms of the steps taken.
pub fn stability_bound(u0_norm: f64, phi_norms: &[f64], sigma: f64, tau: f64) -> f64 {
    u0_norm + 2.0 * sigma * tau * phi_norms.iter().sum::<f64>()
}

/// Diagnostics of one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub bound: f64,
    pub margin: f64,
}

impl StepDiagnostics {
    pub fn passes(&self) -> bool {
        self.margin >= -BOUND_TOLERANCE * self.bound
    }
}

/// Per-level audit of a trajectory against the stability bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub steps: Vec<StepDiagnostics>,
    pub passed: bool,
}

impl AuditReport {
    /// First level whose margin falls below the tolerance.
    pub fn first_violation(&self) -> Option<&StepDiagnostics> {
        self.steps.iter().find(|d| !d.passes())
    }

    /// `true` when the energy never increases from one level to the next
    /// beyond a relative 1e-12.
    pub fn energy_non_increasing(&self) -> bool {
        self.steps
            .windows(2)
            .all(|p| p[1].energy <= p[0].energy * (1.0 + 1e-12) + f64::MIN_POSITIVE)
    }
}

pub fn audit(trajectory: &Trajectory, problem: &ProblemSpec, config: SchemeConfig) -> Result<AuditReport> {
    let grid = problem.grid();
    let u0_norm = grid.norm(problem.u0())?;
    let mut phi_norms = Vec::with_capacity(trajectory.len());
    let mut steps = Vec::with_capacity(trajectory.len());
    for (n, state) in trajectory.states.iter().enumerate() {
        if n > 0 {
            let t_mid = trajectory.states[n - 1].t + config.sigma * config.tau;
            let phi = problem.source().eval(t_mid, grid)?;
            phi_norms.push(grid.norm(&phi)?);
        }
        let energy = energy_norm(state, problem.kernels(), problem.laplacian(), grid)?;
        let bound = stability_bound(u0_norm, &phi_norms, config.sigma, config.tau);
        steps.push(StepDiagnostics {
            step: n,
            t: state.t,
            energy,
            bound,
            margin: bound - energy,
        });
    }
    let passed = steps.iter().all(StepDiagnostics::passes);
    Ok(AuditReport { steps, passed })
}

/// Discrepancy between the `u` components of two trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// Max over time of the node-wise max norm.
    pub max_abs: f64,
    /// Max over time of the h-weighted l2 norm.
    pub weighted_l2: f64,
}

/// Node-wise max and h-weighted l2 norm of `a - b`.
pub fn level_discrepancy(a: &[f64], b: &[f64], grid: &Grid1D) -> Result<Discrepancy> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(Discrepancy {
        max_abs: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
        weighted_l2: grid.norm(&diff)?,
    })
}

pub fn discrepancy(a: &Trajectory, b: &Trajectory, grid: &Grid1D) -> Result<Discrepancy> {
    if a.len() != b.len() {
        return Err(Error::TrajectoryMismatch(format!(
            "{} vs {} time levels",
            a.len(),
            b.len()
        )));
    }
    let mut out = Discrepancy {
        max_abs: 0.0,
        weighted_l2: 0.0,
    };
    for (sa, sb) in a.states.iter().zip(&b.states) {
        if (sa.t - sb.t).abs() > 1e-9 * sa.t.abs().max(1.0) {
            return Err(Error::TrajectoryMismatch(format!(
                "time levels {} and {} differ",
                sa.t, sb.t
            )));
        }
        if sa.u.len() != grid.n() || sb.u.len() != grid.n() {
            return Err(Error::TrajectoryMismatch(format!(
                "spatial sizes {} and {} on a grid of {}",
                sa.u.len(),
                sb.u.len(),
                grid.n()
            )));
        }
        let d = level_discrepancy(&sa.u, &sb.u, grid)?;
        out.max_abs = out.max_abs.max(d.max_abs);
        out.weighted_l2 = out.weighted_l2.max(d.weighted_l2);
    }
    Ok(out)
}

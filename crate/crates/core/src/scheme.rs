//! Localized memory system and its two-level weighted time scheme.
//!
//! With exponential-sum kernels the history integrals are carried by
//! auxiliary fields `v_i` (flux memory) and `w_j` (capacity memory), each
//! obeying `dv/dt + rate · v = u`. Temperature then satisfies
//!
//! ```text
//! du/dt + Σ β_j u + A u - Σ β_j ν_j w_j + Σ α_i A v_i = f
//! ```
//!
//! and every equation is discretized with the weight `σ`:
//! `y^{n+σ} = σ y^{n+1} + (1 - σ) y^n`. Eliminating the auxiliaries leaves
//! one tridiagonal solve `(b_I I + σ τ b_A A) u^{n+1} = χ^n` per step.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::KernelPair;
use crate::spatial::{Grid1D, TridiagonalFactor, TridiagonalOperator};

/// Largest step count accepted by the time loops.
pub const MAX_STEPS: usize = 1_000_000;

type SourceFn = dyn Fn(f64, &Grid1D) -> Vec<f64> + Send + Sync;

/// Right-hand side `f(t)` sampled on the interior nodes.
#[derive(Clone, Default)]
pub enum Source {
    #[default]
    Zero,
    Field(Arc<SourceFn>),
}

impl Source {
    pub fn field<F>(f: F) -> Self
    where
        F: Fn(f64, &Grid1D) -> Vec<f64> + Send + Sync + 'static,
    {
        Source::Field(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }

    pub fn eval(&self, t: f64, grid: &Grid1D) -> Result<Vec<f64>> {
        match self {
            Source::Zero => Ok(vec![0.0; grid.n()]),
            Source::Field(f) => {
                let values = f(t, grid);
                if values.len() != grid.n() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.n(),
                        found: values.len(),
                    });
                }
                Ok(values)
            }
        }
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => f.write_str("Source::Zero"),
            Source::Field(_) => f.write_str("Source::Field(..)"),
        }
    }
}

/// A fully specified Cauchy problem on the grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Grid1D,
    laplacian: TridiagonalOperator,
    kernels: KernelPair,
    u0: Vec<f64>,
    source: Source,
    horizon: f64,
}

impl ProblemSpec {
    pub fn new(grid: Grid1D, kernels: KernelPair, u0: Vec<f64>, source: Source, horizon: f64) -> Result<Self> {
        if u0.len() != grid.n() {
            return Err(Error::DimensionMismatch {
                expected: grid.n(),
                found: u0.len(),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
        }
        Ok(Self {
            laplacian: TridiagonalOperator::laplacian(&grid),
            grid,
            kernels,
            u0,
            source,
            horizon,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn laplacian(&self) -> &TridiagonalOperator {
        &self.laplacian
    }

    pub fn kernels(&self) -> &KernelPair {
        &self.kernels
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_u0(&self, u0: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.kernels.clone(), u0, self.source.clone(), self.horizon)
    }

    pub fn with_kernels(&self, kernels: KernelPair) -> Self {
        Self {
            kernels,
            ..self.clone()
        }
    }
}

/// Solution `(u, v_1..v_m, w_1..w_l)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

impl State {
    pub fn flux_terms(&self) -> usize {
        self.v.len()
    }

    pub fn capacity_terms(&self) -> usize {
        self.w.len()
    }
}

/// Weight `σ` and step `τ` of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub sigma: f64,
    pub tau: f64,
}

impl SchemeConfig {
    pub fn new(sigma: f64, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidArgument(format!(
                "weight sigma = {sigma} must lie in [0, 1]"
            )));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time step tau = {tau} must be positive"
            )));
        }
        Ok(Self { sigma, tau })
    }

    /// Fully implicit scheme.
    pub fn implicit(tau: f64) -> Result<Self> {
        Self::new(1.0, tau)
    }

    /// Stability is only guaranteed for `σ >= 0.5`.
    pub fn is_unconditionally_stable(&self) -> bool {
        self.sigma >= 0.5
    }
}

/// Number of steps `T / τ`, which must be an integer to within 1e-9.
pub fn step_count(horizon: f64, tau: f64) -> Result<usize> {
    let ratio = horizon / tau;
    let rounded = ratio.round();
    if !ratio.is_finite() || rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::StepCountMismatch { horizon, tau, ratio });
    }
    let steps = rounded as usize;
    if steps > MAX_STEPS {
        return Err(Error::TooManySteps {
            requested: steps,
            limit: MAX_STEPS,
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct AuxCoefficients {
    weight: f64,
    rate: f64,
    /// `σ τ / (1 + σ rate τ)`
    gain: f64,
    /// `1 / (1 + σ rate τ)`
    damping: f64,
}

/// Per-step quantities of the eliminated scheme, built once per `(σ, τ)`.
#[derive(Debug, Clone)]
pub struct StepOperator {
    config: SchemeConfig,
    b_identity: f64,
    b_laplacian: f64,
    capacity_sum: f64,
    flux: Vec<AuxCoefficients>,
    capacity: Vec<AuxCoefficients>,
    system: TridiagonalOperator,
    factor: TridiagonalFactor,
}

impl StepOperator {
    pub fn config(&self) -> SchemeConfig {
        self.config
    }

    /// `b_I = 1 + σ τ Σ β_j / (1 + σ ν_j τ)`
    pub fn b_identity(&self) -> f64 {
        self.b_identity
    }

    /// `b_A = 1 + σ τ Σ α_i / (1 + σ μ_i τ)`
    pub fn b_laplacian(&self) -> f64 {
        self.b_laplacian
    }

    /// `B = b_I I + σ τ b_A A`.
    pub fn system(&self) -> &TridiagonalOperator {
        &self.system
    }

    /// `σ τ / (1 + σ μ_i τ)` for each flux term.
    pub fn flux_gains(&self) -> Vec<f64> {
        self.flux.iter().map(|c| c.gain).collect()
    }

    /// `σ τ / (1 + σ ν_j τ)` for each capacity term.
    pub fn capacity_gains(&self) -> Vec<f64> {
        self.capacity.iter().map(|c| c.gain).collect()
    }
}

fn aux_coefficients(kernel: &crate::kernels::ExpSumKernel, sigma: f64, tau: f64) -> Vec<AuxCoefficients> {
    kernel
        .terms()
        .iter()
        .map(|term| {
            let damping = 1.0 / (1.0 + sigma * term.rate * tau);
            AuxCoefficients {
                weight: term.weight,
                rate: term.rate,
                gain: sigma * tau * damping,
                damping,
            }
        })
        .collect()
}

/// Initial level: `u = u0`, all auxiliaries zero.
pub fn initialize(problem: &ProblemSpec) -> Result<State> {
    let n = problem.grid().n();
    if problem.u0().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: problem.u0().len(),
        });
    }
    Ok(State {
        t: 0.0,
        u: problem.u0().to_vec(),
        v: vec![vec![0.0; n]; problem.kernels().flux_terms()],
        w: vec![vec![0.0; n]; problem.kernels().capacity_terms()],
    })
}

/// Assembles and factors `B = b_I I + σ τ b_A A`.
pub fn build_step_operator(problem: &ProblemSpec, config: SchemeConfig) -> Result<StepOperator> {
    let SchemeConfig { sigma, tau } = config;
    if !config.is_unconditionally_stable() {
        log::warn!(
            "sigma = {sigma} < 0.5: the weighted scheme is NOT unconditionally stable and the energy bound is not guaranteed"
        );
    }
    let flux = aux_coefficients(&problem.kernels().flux, sigma, tau);
    let capacity = aux_coefficients(&problem.kernels().capacity, sigma, tau);
    let b_identity = 1.0 + capacity.iter().map(|c| c.weight * c.gain).sum::<f64>();
    let b_laplacian = 1.0 + flux.iter().map(|c| c.weight * c.gain).sum::<f64>();
    let capacity_sum = capacity.iter().map(|c| c.weight).sum();
    let system = problem.laplacian().shifted(b_identity, sigma * tau * b_laplacian);
    let factor = system.factor()?;
    Ok(StepOperator {
        config,
        b_identity,
        b_laplacian,
        capacity_sum,
        flux,
        capacity,
        system,
        factor,
    })
}

fn check_state(state: &State, problem: &ProblemSpec) -> Result<()> {
    let n = problem.grid().n();
    let kernels = problem.kernels();
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
    for y in std::iter::once(&state.u).chain(&state.v).chain(&state.w) {
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
    }
    Ok(())
}

/// One step of the weighted scheme from `state` to `state.t + τ`.
///
/// The source is sampled at `t + σ τ`.
pub fn advance(state: &State, stepop: &StepOperator, problem: &ProblemSpec) -> Result<State> {
    let t_next = state.t + stepop.config.tau;
    advance_to(state, stepop, problem, t_next)
}

fn advance_to(state: &State, stepop: &StepOperator, problem: &ProblemSpec, t_next: f64) -> Result<State> {
    check_state(state, problem)?;
    let SchemeConfig { sigma, tau } = stepop.config;
    let explicit = 1.0 - sigma;
    let n = problem.grid().n();
    let phi = problem.source().eval(state.t + sigma * tau, problem.grid())?;

    // eta_i, theta_j: the parts of v_i^{n+1}, w_j^{n+1} known from level n
    let lagged = |coeffs: &[AuxCoefficients], aux: &[Vec<f64>]| -> Vec<Vec<f64>> {
        coeffs
            .iter()
            .zip(aux)
            .map(|(c, a)| {
                let keep = 1.0 - explicit * c.rate * tau;
                state
                    .u
                    .iter()
                    .zip(a)
                    .map(|(u, a)| c.damping * (explicit * tau * u + keep * a))
                    .collect()
            })
            .collect()
    };
    let eta = lagged(&stepop.flux, &state.v);
    let theta = lagged(&stepop.capacity, &state.w);

    // everything multiplied by A in chi, applied once
    let mut to_laplacian: Vec<f64> = state.u.iter().map(|u| explicit * tau * u).collect();
    for ((c, e), v) in stepop.flux.iter().zip(&eta).zip(&state.v) {
        let scale = tau * c.weight;
        for k in 0..n {
            to_laplacian[k] += scale * (sigma * e[k] + explicit * v[k]);
        }
    }
    let laplacian_part = problem.laplacian().apply(&to_laplacian)?;

    let u_scale = 1.0 - explicit * tau * stepop.capacity_sum;
    let mut chi: Vec<f64> = (0..n)
        .map(|k| u_scale * state.u[k] - laplacian_part[k] + tau * phi[k])
        .collect();
    for ((c, th), w) in stepop.capacity.iter().zip(&theta).zip(&state.w) {
        let scale = tau * c.weight * c.rate;
        for k in 0..n {
            chi[k] += scale * (sigma * th[k] + explicit * w[k]);
        }
    }

    stepop.factor.solve_in_place(&mut chi)?;
    let u = chi;

    let recover = |coeffs: &[AuxCoefficients], lag: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        coeffs
            .iter()
            .zip(lag)
            .map(|(c, mut l)| {
                for (a, un) in l.iter_mut().zip(&u) {
                    *a += c.gain * un;
                }
                l
            })
            .collect()
    };
    let v = recover(&stepop.flux, eta);
    let w = recover(&stepop.capacity, theta);
    Ok(State { t: t_next, u, v, w })
}

/// Largest relative residual of the three defining scheme equations when
/// `prev` and `next` are substituted. Residuals are scaled node by node by
/// the sum of the magnitudes of the terms in that equation.
pub fn scheme_residual(prev: &State, next: &State, problem: &ProblemSpec, config: SchemeConfig) -> Result<f64> {
    check_state(prev, problem)?;
    check_state(next, problem)?;
    let SchemeConfig { sigma, tau } = config;
    let n = problem.grid().n();
    let a = problem.laplacian();
    let weighted = |p: &[f64], q: &[f64]| -> Vec<f64> {
        p.iter()
            .zip(q)
            .map(|(x0, x1)| sigma * x1 + (1.0 - sigma) * x0)
            .collect()
    };
    let phi = problem.source().eval(prev.t + sigma * tau, problem.grid())?;
    let u_mid = weighted(&prev.u, &next.u);
    let au_mid = a.apply(&u_mid)?;

    let mut residual = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let add = |k: usize, term: f64, residual: &mut Vec<f64>, scale: &mut Vec<f64>| {
        residual[k] += term;
        scale[k] += term.abs();
    };
    for k in 0..n {
        add(k, (next.u[k] - prev.u[k]) / tau, &mut residual, &mut scale);
        add(k, au_mid[k], &mut residual, &mut scale);
        add(k, -phi[k], &mut residual, &mut scale);
    }
    let mut worst: f64 = 0.0;
    let aux_residual = |rate: f64, p: &[f64], q: &[f64]| -> f64 {
        let mid = weighted(p, q);
        let mut w: f64 = 0.0;
        for k in 0..n {
            let terms = [(q[k] - p[k]) / tau, rate * mid[k], -u_mid[k]];
            let r: f64 = terms.iter().sum();
            let s: f64 = terms.iter().map(|t| t.abs()).sum();
            if s > 0.0 {
                w = w.max(r.abs() / s);
            }
        }
        w
    };
    for (j, term) in problem.kernels().capacity.terms().iter().enumerate() {
        let w_mid = weighted(&prev.w[j], &next.w[j]);
        for k in 0..n {
            add(k, term.weight * u_mid[k], &mut residual, &mut scale);
            add(k, -term.weight * term.rate * w_mid[k], &mut residual, &mut scale);
        }
        worst = worst.max(aux_residual(term.rate, &prev.w[j], &next.w[j]));
    }
    for (i, term) in problem.kernels().flux.terms().iter().enumerate() {
        let av_mid = a.apply(&weighted(&prev.v[i], &next.v[i]))?;
        for (k, av) in av_mid.iter().enumerate() {
            add(k, term.weight * av, &mut residual, &mut scale);
        }
        worst = worst.max(aux_residual(term.rate, &prev.v[i], &next.v[i]));
    }
    for k in 0..n {
        if scale[k] > 0.0 {
            worst = worst.max(residual[k].abs() / scale[k]);
        }
    }
    Ok(worst)
}

/// Time levels `t^n = n τ`, `n = 0..=N`, of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }

    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// Called with every accepted state after a step.
pub trait Observer {
    fn observe(&mut self, state: &State);
}

impl<F: FnMut(&State)> Observer for F {
    fn observe(&mut self, state: &State) {
        self(state)
    }
}

/// Integrates from `0` to the horizon with a constant step.
pub fn run(problem: &ProblemSpec, config: SchemeConfig, observers: &mut [&mut dyn Observer]) -> Result<Trajectory> {
    let steps = step_count(problem.horizon(), config.tau)?;
    let stepop = build_step_operator(problem, config)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initialize(problem)?);
    for step in 0..steps {
        let t_next = (step + 1) as f64 * config.tau;
        let next = advance_to(&states[step], &stepop, problem, t_next)?;
        for observer in observers.iter_mut() {
            observer.observe(&next);
        }
        states.push(next);
    }
    Ok(Trajectory { states })
}

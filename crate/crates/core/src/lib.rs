//! Heat conduction with heat-flux and heat-capacity memory in one space
//! dimension.
//!
//! Memory kernels are exponential sums ([`kernels`]), which turns the
//! nonlocal integrodifferential equation into a local system for the
//! temperature and one auxiliary field per kernel term. That system is
//! advanced with a two-level weighted scheme ([`scheme`]) costing a single
//! tridiagonal solve per step. [`diagnostics`] audits the energy-norm
//! stability bound of the scheme and [`oracles`] holds independent
//! reference solvers used to validate it.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod initial;
pub mod kernels;
pub mod oracles;
pub mod scheme;
pub mod spatial;

pub use diagnostics::{audit, discrepancy, energy_norm, stability_bound, AuditReport, Discrepancy, StepDiagnostics};
pub use error::{Error, Result};
pub use initial::{initial_preset, paper_ramp, InitialPreset};
pub use kernels::{
    fit_exp_sum, fit_residual, maxwell_cattaneo_kernel, ExpSumKernel, FitOptions, KernelPair, KernelTerm,
};
pub use oracles::{
    classical_heat_series, dense_block_run, dense_block_step, modal_compare, modal_solve, volterra_solve,
    ModalComparison, ModalProblem, ModalSeries,
};
pub use scheme::{
    advance, build_step_operator, initialize, run, scheme_residual, step_count, Observer, ProblemSpec, SchemeConfig,
    Source, State, StepOperator, Trajectory,
};
pub use spatial::{Grid1D, TridiagonalOperator};

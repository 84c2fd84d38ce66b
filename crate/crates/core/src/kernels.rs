//! Exponential-sum relaxation functions.
//!
//! A kernel `k(t) = Σ weight_i · exp(-rate_i · t)` with strictly positive
//! weights and rates. The empty sum is the zero kernel. The flux kernel
//! weights the history of `A u`, the capacity kernel the history of `u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One `weight · exp(-rate · t)` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTerm {
    pub weight: f64,
    pub rate: f64,
}

impl KernelTerm {
    pub fn new(weight: f64, rate: f64) -> Self {
        Self { weight, rate }
    }
}

/// A finite sum of decaying exponentials with positive coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSumKernel {
    terms: Vec<KernelTerm>,
}

impl ExpSumKernel {
    /// Builds a kernel, rejecting any term whose weight or rate is not
    /// strictly positive (NaN included).
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        for (index, term) in terms.iter().enumerate() {
            if !(term.weight > 0.0 && term.rate > 0.0) || !term.weight.is_finite() || !term.rate.is_finite() {
                return Err(Error::InvalidKernelTerm {
                    index,
                    weight: term.weight,
                    rate: term.rate,
                });
            }
        }
        Ok(Self { terms })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(w, r)| KernelTerm::new(w, r)).collect())
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value of the kernel at `t >= 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.weight * (-term.rate * t).exp()).sum()
    }

    /// `k(0)`, the sum of the weights.
    pub fn initial_value(&self) -> f64 {
        self.terms.iter().map(|term| term.weight).sum()
    }

    /// Exact integral of the kernel over `[a, b]`, `0 <= a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                // exp(-r a) - exp(-r b) = exp(-r a) * (1 - exp(-r (b - a)))
                term.weight / term.rate * (-term.rate * a).exp() * -(-term.rate * (b - a)).exp_m1()
            })
            .sum()
    }
}

/// Flux kernel (`m` terms) and capacity kernel (`l` terms).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelPair {
    pub flux: ExpSumKernel,
    pub capacity: ExpSumKernel,
}

impl KernelPair {
    pub fn new(flux: ExpSumKernel, capacity: ExpSumKernel) -> Self {
        Self { flux, capacity }
    }

    /// No memory at all: the classical heat equation.
    pub fn classical() -> Self {
        Self::default()
    }

    pub fn flux_terms(&self) -> usize {
        self.flux.len()
    }

    pub fn capacity_terms(&self) -> usize {
        self.capacity.len()
    }
}

/// Single-exponential flux relaxation `(k / tau_q) exp(-t / tau_q)`.
pub fn maxwell_cattaneo_kernel(conductivity: f64, relaxation_time: f64) -> Result<ExpSumKernel> {
    if !(conductivity > 0.0) || !(relaxation_time > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Maxwell-Cattaneo kernel needs positive conductivity and relaxation time, got {conductivity} and {relaxation_time}"
        )));
    }
    ExpSumKernel::new(vec![KernelTerm::new(
        conductivity / relaxation_time,
        1.0 / relaxation_time,
    )])
}

/// Options for [`fit_exp_sum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Samples with `max |value|` at or below this are treated as zero data.
    pub zero_threshold: f64,
    /// Return the zero kernel for zero data instead of failing.
    pub allow_zero_kernel: bool,
    /// Largest accepted `max |residual| / max |value|` of the final fit.
    pub max_relative_residual: f64,
    /// Smallest accepted ratio of extreme singular values in the
    /// least-squares systems.
    pub min_singular_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            zero_threshold: 1e-300,
            allow_zero_kernel: false,
            max_relative_residual: 1e-6,
            min_singular_ratio: 1e-13,
        }
    }
}

/// Prony fit of an `terms`-term exponential sum to uniformly spaced samples.
///
/// Linear prediction gives the characteristic polynomial whose roots are
/// `exp(-rate · dt)`; the weights then follow from linear least squares.
/// Complex roots or roots outside `(0, 1)` fail the fit. Terms whose fitted
/// weight is not positive are dropped and the remaining weights re-fitted.
pub fn fit_exp_sum(samples: &[(f64, f64)], terms: usize, options: &FitOptions) -> Result<ExpSumKernel> {
    if terms == 0 {
        return Err(Error::InvalidArgument("term count must be at least 1".into()));
    }
    if samples.len() < 2 * terms {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot determine {} terms (need at least {})",
            samples.len(),
            terms,
            2 * terms
        )));
    }
    let dt = uniform_spacing(samples)?;

    let scale = samples.iter().fold(0.0_f64, |acc, &(_, y)| acc.max(y.abs()));
    if !scale.is_finite() {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    if scale <= options.zero_threshold {
        return if options.allow_zero_kernel {
            Ok(ExpSumKernel::zero())
        } else {
            Err(Error::FitFailure("samples are identically zero".into()))
        };
    }

    let values: Vec<f64> = samples.iter().map(|&(_, y)| y / scale).collect();
    let rates = prony_rates(&values, terms, dt, options)?;

    let mut rates = rates;
    let mut weights = fit_weights(samples, &rates, options)?;
    while weights.iter().any(|&w| !(w > 0.0)) {
        let kept: Vec<usize> = (0..rates.len()).filter(|&i| weights[i] > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::FitFailure("no term with positive weight".into()));
        }
        log::debug!("dropping {} non-positive weight term(s)", rates.len() - kept.len());
        rates = kept.iter().map(|&i| rates[i]).collect();
        weights = fit_weights(samples, &rates, options)?;
    }

    let kernel = ExpSumKernel::new(
        weights
            .iter()
            .zip(&rates)
            .map(|(&w, &r)| KernelTerm::new(w, r))
            .collect(),
    )
    .map_err(|e| Error::FitFailure(e.to_string()))?;

    let residual = fit_residual(&kernel, samples);
    if residual > options.max_relative_residual * scale {
        return Err(Error::FitFailure(format!(
            "relative residual {:.3e} exceeds tolerance {:.3e}",
            residual / scale,
            options.max_relative_residual
        )));
    }
    Ok(kernel)
}

/// `max |kernel(t) - value|` over the samples.
pub fn fit_residual(kernel: &ExpSumKernel, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(t, y)| (kernel.eval_unchecked(t) - y).abs())
        .fold(0.0, f64::max)
}

fn uniform_spacing(samples: &[(f64, f64)]) -> Result<f64> {
    let dt = samples[1].0 - samples[0].0;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(
            "sample times must be strictly increasing".into(),
        ));
    }
    for pair in samples.windows(2) {
        let step = pair[1].0 - pair[0].0;
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(
                "sample times must be strictly increasing".into(),
            ));
        }
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidArgument(format!(
                "sample times must be uniformly spaced (step {step} vs {dt})"
            )));
        }
    }
    Ok(dt)
}

fn prony_rates(values: &[f64], terms: usize, dt: f64, options: &FitOptions) -> Result<Vec<f64>> {
    // y[k+m] + c_1 y[k+m-1] + ... + c_m y[k] = 0
    let rows = values.len() - terms;
    let lhs = DMatrix::from_fn(rows, terms, |k, p| values[k + terms - 1 - p]);
    let rhs = DVector::from_fn(rows, |k, _| -values[k + terms]);
    let coeffs = least_squares(lhs, rhs, options, "linear prediction")?;

    let mut companion = DMatrix::<f64>::zeros(terms, terms);
    for p in 0..terms {
        companion[(0, p)] = -coeffs[p];
    }
    for p in 1..terms {
        companion[(p, p - 1)] = 1.0;
    }
    let roots = companion.complex_eigenvalues();

    let mut rates = Vec::with_capacity(terms);
    for root in roots.iter() {
        if root.im.abs() > 1e-10 * root.norm().max(1e-300) {
            return Err(Error::FitFailure(format!(
                "complex prediction root {:.6e}{:+.6e}i (oscillatory data)",
                root.re, root.im
            )));
        }
        let z = root.re;
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::FitFailure(format!(
                "prediction root {z:.6e} does not correspond to a positive decay rate"
            )));
        }
        rates.push(-z.ln() / dt);
    }
    rates.sort_by(|a, b| a.total_cmp(b));
    Ok(rates)
}

fn fit_weights(samples: &[(f64, f64)], rates: &[f64], options: &FitOptions) -> Result<Vec<f64>> {
    let basis = DMatrix::from_fn(samples.len(), rates.len(), |k, i| (-rates[i] * samples[k].0).exp());
    let rhs = DVector::from_fn(samples.len(), |k, _| samples[k].1);
    let weights = least_squares(basis, rhs, options, "weight")?;
    Ok(weights.iter().copied().collect())
}

fn least_squares(lhs: DMatrix<f64>, rhs: DVector<f64>, options: &FitOptions, what: &str) -> Result<DVector<f64>> {
    let svd = lhs.svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if !(largest > 0.0) || smallest < options.min_singular_ratio * largest {
        return Err(Error::IllConditioned(format!(
            "{what} system has singular value ratio {:.3e}",
            if largest > 0.0 { smallest / largest } else { 0.0 }
        )));
    }
    svd.solve(&rhs, 0.0)
        .map_err(|e| Error::IllConditioned(format!("{what} solve failed: {e}")))
}

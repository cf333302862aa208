//! Per-network ERGM estimation.
//!
//! All supported terms are dyad-independent, so the exact likelihood factors
//! over unordered dyads and can be maximized directly by Newton–Raphson. The
//! pseudo-likelihood and the full-enumeration oracle share the same optimizer
//! but evaluate their objectives independently.

mod brute;
mod exact;
mod filter;
mod mple;

pub use brute::{brute_force_mle, EnumeratedLikelihood, MAX_BRUTE_FORCE_NODES};
pub use exact::{fit_exact, DyadLikelihood};
pub use filter::{filter_fits, Exclusion, FilterOptions, FilterOutcome};
pub use mple::{fit_mple, PseudoLikelihood};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::network::{AttributeTable, DirectedNetwork};
use crate::num::Real;
use crate::terms::{ModelSpec, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Exact dyad-factorized maximum likelihood.
    #[default]
    Exact,
    /// Maximum pseudo-likelihood (logistic regression on change statistics).
    Mple,
    /// Full enumeration of all graphs; tiny networks only.
    Brute,
}

impl Estimator {
    pub fn fit<T: Real>(
        self,
        network: &DirectedNetwork,
        attrs: &AttributeTable,
        model: &ModelSpec,
        options: &FitOptions,
    ) -> Result<FitResult<T>> {
        match self {
            Estimator::Exact => fit_exact(network, attrs, model, options),
            Estimator::Mple => fit_mple(network, attrs, model, options),
            Estimator::Brute => brute_force_mle(network, attrs, model, options),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Coefficient of the λ‖θ‖² penalty applied once separation is detected.
    pub ridge: f64,
    /// Any |θ_k| above this during unpenalized iterations signals separation.
    pub separation_bound: f64,
    pub max_step_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            ridge: 1e-4,
            separation_bound: 10.0,
            max_step_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub network_id: String,
    pub country: String,
    pub model: Preset,
    pub terms: Vec<String>,
    pub estimator: Estimator,
    pub theta: Vec<T>,
    pub covariance: SquareMatrix<T>,
    pub standard_errors: Vec<T>,
    pub log_likelihood: T,
    pub converged: bool,
    pub separation_flag: bool,
    pub newton_iterations: usize,
}

/// A concave objective: value, gradient, and information (negative Hessian).
pub trait Objective<T: Real> {
    fn dim(&self) -> usize;
    fn evaluate(&self, theta: &[T]) -> (T, Vec<T>, SquareMatrix<T>);
    fn value(&self, theta: &[T]) -> T {
        self.evaluate(theta).0
    }
}

/// Maximizer output before it is attached to a network.
#[derive(Debug, Clone)]
pub struct Optimum<T> {
    pub theta: Vec<T>,
    pub covariance: SquareMatrix<T>,
    /// Unpenalized objective at `theta`.
    pub value: T,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
}

enum Outcome<T> {
    Done { theta: Vec<T>, converged: bool, iterations: usize },
    Separated { iterations: usize },
}

fn penalized<T: Real, O: Objective<T>>(obj: &O, theta: &[T], ridge: T) -> (T, Vec<T>, SquareMatrix<T>) {
    let (mut f, mut g, mut info) = obj.evaluate(theta);
    if ridge > T::zero() {
        let two = T::lit(2.0);
        f = f - ridge * theta.iter().map(|&t| t * t).sum::<T>();
        for (gk, &t) in g.iter_mut().zip(theta) {
            *gk = *gk - two * ridge * t;
        }
        info.add_diagonal(two * ridge);
    }
    (f, g, info)
}

fn newton<T: Real, O: Objective<T>>(obj: &O, ridge: T, opts: &FitOptions) -> Outcome<T> {
    let p = obj.dim();
    let unpenalized = ridge == T::zero();
    let bound = T::lit(opts.separation_bound);
    let grad_tol = T::lit(opts.gradient_tolerance);
    let step_tol = T::lit(opts.step_tolerance);
    let mut theta = vec![T::zero(); p];
    for iter in 0..opts.max_iterations {
        let (f, g, info) = penalized(obj, &theta, ridge);
        let Some(chol) = info.cholesky() else {
            return if unpenalized {
                Outcome::Separated { iterations: iter }
            } else {
                Outcome::Done { theta, converged: false, iterations: iter }
            };
        };
        let step = chol.solve(&g);
        let max_grad = g.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let step_norm = step.iter().map(|&s| s * s).sum::<T>().sqrt();
        if max_grad < grad_tol || step_norm < step_tol {
            // final Newton step: quadratic convergence polishes the last digits
            for (t, s) in theta.iter_mut().zip(&step) {
                *t = *t + *s;
            }
            return Outcome::Done { theta, converged: true, iterations: iter + 1 };
        }
        // rounding slack: near the optimum the true gain drops below the
        // resolution of the summed objective
        let slack = T::lit(64.0) * T::epsilon() * (T::one() + f.abs());
        let mut scale = T::one();
        let mut halvings = 0;
        let candidate = loop {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + scale * s).collect();
            let fc = penalized(obj, &cand, ridge).0;
            if fc.is_finite() && fc >= f - slack {
                break cand;
            }
            halvings += 1;
            if halvings >= opts.max_step_halvings {
                if unpenalized {
                    return Outcome::Separated { iterations: iter + 1 };
                }
                return Outcome::Done { theta, converged: false, iterations: iter + 1 };
            }
            scale = scale / T::lit(2.0);
        };
        theta = candidate;
        if unpenalized && theta.iter().any(|t| t.abs() > bound) {
            return Outcome::Separated { iterations: iter + 1 };
        }
    }
    Outcome::Done { theta, converged: false, iterations: opts.max_iterations }
}

/// Relative pivot size below which the information at θ = 0 counts as singular.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-10;

/// Newton–Raphson from θ = 0 with step halving; restarts with the ridge
/// penalty when separation is detected.
pub fn maximize<T: Real, O: Objective<T>>(obj: &O, opts: &FitOptions) -> Result<Optimum<T>> {
    let p = obj.dim();
    let (_, _, info0) = obj.evaluate(&vec![T::zero(); p]);
    if info0.cholesky_with_tolerance(T::lit(IDENTIFIABILITY_TOLERANCE)).is_none() {
        return Err(Error::NonIdentified);
    }
    let (theta, converged, separated, iterations, ridge) = match newton(obj, T::zero(), opts) {
        Outcome::Done { theta, converged, iterations } => (theta, converged, false, iterations, T::zero()),
        Outcome::Separated { iterations: first } => {
            let ridge = T::lit(opts.ridge);
            match newton(obj, ridge, opts) {
                Outcome::Done { theta, converged, iterations } => {
                    (theta, converged, true, first + iterations, ridge)
                }
                Outcome::Separated { .. } => unreachable!("penalized runs never report separation"),
            }
        }
    };
    let (value, _, info) = obj.evaluate(&theta);
    let mut info = info;
    if ridge > T::zero() {
        info.add_diagonal(T::lit(2.0) * ridge);
    }
    let covariance = info.cholesky().ok_or(Error::NonIdentified)?.inverse();
    Ok(Optimum { theta, covariance, value, converged, separated, iterations })
}

pub(crate) fn into_result<T: Real>(
    network: &DirectedNetwork,
    model: &ModelSpec,
    estimator: Estimator,
    opt: Optimum<T>,
) -> FitResult<T> {
    let standard_errors = opt.covariance.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
    FitResult {
        network_id: network.network_id.clone(),
        country: network.country.clone(),
        model: model.preset_kind(),
        terms: model.term_names(),
        estimator,
        theta: opt.theta,
        covariance: opt.covariance,
        standard_errors,
        log_likelihood: opt.value,
        converged: opt.converged,
        separation_flag: opt.separated,
        newton_iterations: opt.iterations,
    }
}

pub(crate) fn check_size(network: &DirectedNetwork) -> Result<()> {
    if network.n() < 2 {
        return Err(Error::DegenerateNetwork(network.n()));
    }
    Ok(())
}

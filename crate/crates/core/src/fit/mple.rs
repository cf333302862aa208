use crate::error::Result;
use crate::linalg::SquareMatrix;
use crate::network::{AttributeTable, DirectedNetwork};
use crate::num::{log_logistic, logistic, Real};
use crate::terms::{BoundModel, ModelSpec};

use super::{check_size, into_result, maximize, Estimator, FitOptions, FitResult, Objective};

/// Logistic pseudo-likelihood over all n(n−1) ordered tie slots, with the
/// change statistics as the design matrix.
#[derive(Debug, Clone)]
pub struct PseudoLikelihood<T> {
    dim: usize,
    rows: Vec<(Vec<T>, bool)>,
}

impl<T: Real> PseudoLikelihood<T> {
    pub fn new(network: &DirectedNetwork, attrs: &AttributeTable, model: &ModelSpec) -> Result<Self> {
        let bound = BoundModel::<T>::bind(model, attrs)?;
        let n = network.n();
        let mut rows = Vec::with_capacity(n * n.saturating_sub(1));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rows.push((bound.change_stats(network, i, j)?, network.has_tie(i, j)));
                }
            }
        }
        Ok(Self { dim: bound.len(), rows })
    }

    /// Plain logistic regression on `(covariates, response)` rows.
    pub fn from_rows(dim: usize, rows: Vec<(Vec<T>, bool)>) -> Self {
        Self { dim, rows }
    }

    pub fn all_responses_equal(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].1 == w[1].1)
    }
}

impl<T: Real> Objective<T> for PseudoLikelihood<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    /// One IRLS iteration solves (XᵀWX) Δ = Xᵀ(y − p) with W = diag(p(1 − p)),
    /// i.e. a Newton step on this objective.
    fn evaluate(&self, theta: &[T]) -> (T, Vec<T>, SquareMatrix<T>) {
        let mut value = T::zero();
        let mut score = vec![T::zero(); self.dim];
        let mut xtwx = SquareMatrix::zeros(self.dim);
        for (x, y) in &self.rows {
            let eta: T = x.iter().zip(theta).map(|(&a, &b)| a * b).sum();
            let p = logistic(eta);
            value = value + if *y { log_logistic(eta) } else { log_logistic(-eta) };
            let resid = if *y { T::one() - p } else { -p };
            for (s, &xk) in score.iter_mut().zip(x) {
                *s = *s + resid * xk;
            }
            xtwx.add_outer(x, p * (T::one() - p));
        }
        (value, score, xtwx)
    }
}

/// Maximum pseudo-likelihood estimate. `log_likelihood` holds the log
/// pseudo-likelihood.
pub fn fit_mple<T: Real>(
    network: &DirectedNetwork,
    attrs: &AttributeTable,
    model: &ModelSpec,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    check_size(network)?;
    let lik = PseudoLikelihood::<T>::new(network, attrs, model)?;
    let mut opt = maximize(&lik, options)?;
    if lik.all_responses_equal() {
        opt.separated = true;
    }
    Ok(into_result(network, model, Estimator::Mple, opt))
}

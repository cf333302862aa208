use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::network::{AttributeTable, DirectedNetwork};
use crate::num::{log_sum_exp, Real};
use crate::terms::{BoundModel, ModelSpec};

use super::{check_size, into_result, maximize, Estimator, FitOptions, FitResult, Objective};

/// Enumeration covers 2^{n(n−1)} graphs: 4096 at n = 4.
pub const MAX_BRUTE_FORCE_NODES: usize = 4;

/// ERGM log-likelihood with κ(θ) computed by summing over every graph on the
/// node set. Shares no code with the dyad factorization beyond g(y).
#[derive(Debug, Clone)]
pub struct EnumeratedLikelihood<T> {
    observed: Vec<T>,
    all_stats: Vec<Vec<T>>,
}

impl<T: Real> EnumeratedLikelihood<T> {
    pub fn new(network: &DirectedNetwork, attrs: &AttributeTable, model: &ModelSpec) -> Result<Self> {
        let n = network.n();
        if n > MAX_BRUTE_FORCE_NODES {
            return Err(Error::SizeLimit { n, max: MAX_BRUTE_FORCE_NODES });
        }
        let bound = BoundModel::<T>::bind(model, attrs)?;
        let slots: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let mut all_stats = Vec::with_capacity(1 << slots.len());
        let mut graph = DirectedNetwork::with_size(n);
        for mask in 0u32..(1u32 << slots.len()) {
            for (b, &(i, j)) in slots.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    graph.add_tie(i, j)?;
                } else {
                    graph.remove_tie(i, j)?;
                }
            }
            all_stats.push(bound.sufficient_stats(&graph));
        }
        Ok(Self { observed: bound.sufficient_stats(network), all_stats })
    }

    /// ln κ(θ).
    pub fn log_normalizer(&self, theta: &[T]) -> T {
        let lw: Vec<T> = self.all_stats.iter().map(|g| dot(g, theta)).collect();
        log_sum_exp(&lw)
    }

    pub fn log_likelihood(&self, theta: &[T]) -> T {
        dot(&self.observed, theta) - self.log_normalizer(theta)
    }

    pub fn graph_count(&self) -> usize {
        self.all_stats.len()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T: Real> Objective<T> for EnumeratedLikelihood<T> {
    fn dim(&self) -> usize {
        self.observed.len()
    }

    fn evaluate(&self, theta: &[T]) -> (T, Vec<T>, SquareMatrix<T>) {
        let p = self.dim();
        let lw: Vec<T> = self.all_stats.iter().map(|g| dot(g, theta)).collect();
        let lse = log_sum_exp(&lw);
        let mut mean = vec![T::zero(); p];
        let mut second = SquareMatrix::zeros(p);
        for (g, &l) in self.all_stats.iter().zip(&lw) {
            let prob = (l - lse).exp();
            for k in 0..p {
                mean[k] = mean[k] + prob * g[k];
            }
            second.add_outer(g, prob);
        }
        second.add_outer(&mean, -T::one());
        let grad = self.observed.iter().zip(&mean).map(|(&o, &m)| o - m).collect();
        (dot(&self.observed, theta) - lse, grad, second)
    }
}

/// Reference MLE for networks of at most four nodes.
pub fn brute_force_mle<T: Real>(
    network: &DirectedNetwork,
    attrs: &AttributeTable,
    model: &ModelSpec,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    check_size(network)?;
    let lik = EnumeratedLikelihood::<T>::new(network, attrs, model)?;
    let opt = maximize(&lik, options)?;
    Ok(into_result(network, model, Estimator::Brute, opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeAttributes;
    use crate::num::logit;
    use crate::terms::TermKind;

    fn attrs(n: usize) -> AttributeTable {
        AttributeTable::new(vec![NodeAttributes { female: Some(true), ..Default::default() }; n])
    }

    #[test]
    fn uniform_two_node_likelihood() {
        let net = DirectedNetwork::from_ties(2, &[(0, 1), (1, 0)]).unwrap();
        let model = ModelSpec::custom(vec![TermKind::Edges, TermKind::Mutual]).unwrap();
        let lik = EnumeratedLikelihood::<f64>::new(&net, &attrs(2), &model).unwrap();
        assert_eq!(lik.graph_count(), 4);
        assert!((lik.log_likelihood(&[0.0, 0.0]) + 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn edges_only_matches_closed_form() {
        let net = DirectedNetwork::from_ties(3, &[(0, 1), (1, 2)]).unwrap();
        let model = ModelSpec::custom(vec![TermKind::Edges]).unwrap();
        let fit: FitResult<f64> = brute_force_mle(&net, &attrs(3), &model, &FitOptions::default()).unwrap();
        assert!((fit.theta[0] - logit(2.0 / 6.0)).abs() < 1e-9);
    }

    #[test]
    fn size_limit() {
        let net = DirectedNetwork::with_size(5);
        let model = ModelSpec::custom(vec![TermKind::Edges]).unwrap();
        let err = brute_force_mle::<f64>(&net, &attrs(5), &model, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SizeLimit { n: 5, max: 4 }));
    }
}

use crate::error::Result;
use crate::linalg::SquareMatrix;
use crate::network::{AttributeTable, DirectedNetwork};
use crate::num::{log_sum_exp, Real};
use crate::terms::{dyad_state, BoundModel, ModelSpec, DYAD_STATES};

use super::{check_size, into_result, maximize, Estimator, FitOptions, FitResult, Objective};

/// Exact log-likelihood of a dyad-independent ERGM, factorized over the
/// n(n−1)/2 unordered dyads.
#[derive(Debug, Clone)]
pub struct DyadLikelihood<T> {
    dim: usize,
    /// Per dyad: statistic vectors of the four states and the observed state.
    dyads: Vec<([Vec<T>; DYAD_STATES], usize)>,
}

impl<T: Real> DyadLikelihood<T> {
    pub fn new(network: &DirectedNetwork, attrs: &AttributeTable, model: &ModelSpec) -> Result<Self> {
        let bound = BoundModel::<T>::bind(model, attrs)?;
        Ok(Self::from_bound(network, &bound))
    }

    pub fn from_bound(network: &DirectedNetwork, bound: &BoundModel<T>) -> Self {
        let dyads = bound
            .all_dyads()
            .into_iter()
            .map(|(i, j, d)| {
                let states = [0, 1, 2, 3].map(|s| d.state_stats(s));
                (states, dyad_state(network, i, j))
            })
            .collect();
        Self { dim: bound.len(), dyads }
    }

    pub fn log_likelihood(&self, theta: &[T]) -> T {
        self.dyads
            .iter()
            .map(|(states, obs)| {
                let lw = states.clone().map(|s| dot(&s, theta));
                lw[*obs] - log_sum_exp(&lw)
            })
            .sum()
    }

    pub fn gradient(&self, theta: &[T]) -> Vec<T> {
        self.evaluate(theta).1
    }

    /// Probabilities of the four states of dyad `k` at `theta`.
    pub fn state_probabilities(&self, k: usize, theta: &[T]) -> [T; DYAD_STATES] {
        let lw = self.dyads[k].0.clone().map(|s| dot(&s, theta));
        let lse = log_sum_exp(&lw);
        lw.map(|x| (x - lse).exp())
    }

    pub fn dyad_count(&self) -> usize {
        self.dyads.len()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T: Real> Objective<T> for DyadLikelihood<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[T]) -> (T, Vec<T>, SquareMatrix<T>) {
        let p = self.dim;
        let mut value = T::zero();
        let mut grad = vec![T::zero(); p];
        let mut info = SquareMatrix::zeros(p);
        for (states, obs) in &self.dyads {
            let lw: Vec<T> = states.iter().map(|s| dot(s, theta)).collect();
            let lse = log_sum_exp(&lw);
            value = value + lw[*obs] - lse;
            let mut mean = vec![T::zero(); p];
            for (s, &l) in states.iter().zip(&lw) {
                let prob = (l - lse).exp();
                for k in 0..p {
                    mean[k] = mean[k] + prob * s[k];
                }
                info.add_outer(s, prob);
            }
            info.add_outer(&mean, -T::one());
            for k in 0..p {
                grad[k] = grad[k] + states[*obs][k] - mean[k];
            }
        }
        (value, grad, info)
    }
}

/// Exact maximum likelihood by Newton–Raphson on the dyad-factorized
/// likelihood.
pub fn fit_exact<T: Real>(
    network: &DirectedNetwork,
    attrs: &AttributeTable,
    model: &ModelSpec,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    check_size(network)?;
    let lik = DyadLikelihood::<T>::new(network, attrs, model)?;
    let opt = maximize(&lik, options)?;
    Ok(into_result(network, model, Estimator::Exact, opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeAttributes;
    use crate::num::logit;
    use crate::terms::{ModelSpec, TermKind};

    fn attrs(n: usize) -> AttributeTable {
        AttributeTable::new(
            (0..n)
                .map(|i| NodeAttributes {
                    female: Some(i % 2 == 0),
                    skills: Some(i as f64 / n as f64),
                    perceived_skills: Some(0.5),
                    ..Default::default()
                })
                .collect(),
        )
    }

    #[test]
    fn edges_only_is_logit_density() {
        let net = DirectedNetwork::from_ties(5, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 3), (0, 4)]).unwrap();
        let model = ModelSpec::custom(vec![TermKind::Edges]).unwrap();
        let fit: FitResult<f64> = fit_exact(&net, &attrs(5), &model, &FitOptions::default()).unwrap();
        assert!((fit.theta[0] - logit(6.0 / 20.0)).abs() < 1e-9);
        assert!(fit.converged && !fit.separation_flag);
        // observed information of a binomial logit: N p (1-p)
        let info = 20.0 * 0.3 * 0.7;
        assert!((fit.standard_errors[0] - (1.0_f64 / info).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn dyad_probabilities_sum_to_one() {
        let net = DirectedNetwork::with_size(2);
        let model = ModelSpec::custom(vec![TermKind::Edges, TermKind::Mutual]).unwrap();
        let lik = DyadLikelihood::<f64>::new(&net, &attrs(2), &model).unwrap();
        for theta in [[0.0, 0.0], [-3.0, 2.5], [4.0, -7.0]] {
            let p = lik.state_probabilities(0, &theta);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((lik.log_likelihood(&[0.0, 0.0]) + 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn separation_is_flagged_and_ridged() {
        // every tie goes from a female to a female: nodematch separates
        let net = DirectedNetwork::from_ties(4, &[(0, 2), (2, 0)]).unwrap();
        let model = ModelSpec::custom(vec![TermKind::Edges, TermKind::NodeMatch(crate::network::Attribute::Female)]).unwrap();
        let fit: FitResult<f64> = fit_exact(&net, &attrs(4), &model, &FitOptions::default()).unwrap();
        assert!(fit.separation_flag);
        assert!(fit.theta.iter().all(|t| t.is_finite()));
        assert!(fit.converged);
    }

    #[test]
    fn degenerate_network_errors() {
        let net = DirectedNetwork::with_size(1);
        let model = ModelSpec::custom(vec![TermKind::Edges]).unwrap();
        let err = fit_exact::<f64>(&net, &attrs(1), &model, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, crate::Error::DegenerateNetwork(1)));
    }

    #[test]
    fn collinear_design_is_not_identified() {
        let mut a = attrs(4);
        for r in &mut a.rows {
            r.female = Some(true);
        }
        let net = DirectedNetwork::from_ties(4, &[(0, 1), (2, 3)]).unwrap();
        let model = ModelSpec::preset(crate::terms::Preset::H2);
        let err = fit_exact::<f64>(&net, &a, &model, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, crate::Error::NonIdentified));
    }

    #[test]
    fn single_precision_fit() {
        let net = DirectedNetwork::from_ties(4, &[(0, 1), (1, 0), (2, 3)]).unwrap();
        let model = ModelSpec::custom(vec![TermKind::Edges, TermKind::Mutual]).unwrap();
        let opts = FitOptions { gradient_tolerance: 1e-4, step_tolerance: 1e-6, ..Default::default() };
        let f32_fit: FitResult<f32> = fit_exact(&net, &attrs(4), &model, &opts).unwrap();
        let f64_fit: FitResult<f64> = fit_exact(&net, &attrs(4), &model, &FitOptions::default()).unwrap();
        for (a, b) in f32_fit.theta.iter().zip(&f64_fit.theta) {
            assert!((f64::from(*a) - b).abs() < 1e-3);
        }
    }
}

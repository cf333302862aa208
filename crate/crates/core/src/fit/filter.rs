use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::pool::EffectObservation;

use super::FitResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterOptions {
    /// A network is dropped when any of its standard errors exceeds this.
    pub max_se: f64,
    pub require_converged: bool,
    pub exclude_separated: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self { max_se: 10.0, require_converged: true, exclude_separated: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub network_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<T> {
    pub terms: Vec<String>,
    /// Network-major, term-minor order.
    pub observations: Vec<EffectObservation<T>>,
    pub exclusions: Vec<Exclusion>,
}

impl<T: Real> FilterOutcome<T> {
    pub fn for_term(&self, term: &str) -> Vec<EffectObservation<T>> {
        self.observations.iter().filter(|o| o.term == term).cloned().collect()
    }

    pub fn network_count(&self) -> usize {
        self.observations.len() / self.terms.len().max(1)
    }
}

fn exclusion_reason<T: Real>(fit: &FitResult<T>, opts: &FilterOptions) -> Option<String> {
    if opts.require_converged && !fit.converged {
        return Some(format!("not converged after {} Newton iterations", fit.newton_iterations));
    }
    if opts.exclude_separated && fit.separation_flag {
        return Some("separation detected (ridge-penalized estimate)".into());
    }
    let max_se = T::lit(opts.max_se);
    for (term, (&se, &est)) in fit.terms.iter().zip(fit.standard_errors.iter().zip(&fit.theta)) {
        if !se.is_finite() || !est.is_finite() || se <= T::zero() {
            return Some(format!("non-finite or zero estimate/standard error for `{term}`"));
        }
        if se > max_se {
            return Some(format!("standard error {se} of `{term}` exceeds {}", opts.max_se));
        }
    }
    None
}

/// Turns per-network fits into pooling data points. A network failing any
/// check is excluded for every term of the model.
pub fn filter_fits<T: Real>(fits: &[FitResult<T>], opts: &FilterOptions) -> Result<FilterOutcome<T>> {
    let Some(first) = fits.first() else {
        return Err(Error::EmptyPool("no fits supplied".into()));
    };
    let terms = first.terms.clone();
    if let Some(other) = fits.iter().find(|f| f.terms != terms) {
        return Err(Error::InvalidConfig(format!(
            "fits mix model specifications (`{}` differs from `{}`)",
            other.network_id, first.network_id
        )));
    }
    let mut observations = Vec::new();
    let mut exclusions = Vec::new();
    for fit in fits {
        if let Some(reason) = exclusion_reason(fit, opts) {
            log::info!("excluding network {}: {reason}", fit.network_id);
            exclusions.push(Exclusion { network_id: fit.network_id.clone(), reason });
            continue;
        }
        for (k, term) in terms.iter().enumerate() {
            observations.push(EffectObservation {
                network_id: fit.network_id.clone(),
                country: fit.country.clone(),
                term: term.clone(),
                estimate: fit.theta[k],
                std_error: fit.standard_errors[k],
            });
        }
    }
    if observations.is_empty() {
        return Err(Error::EmptyPool(format!("all {} fits were excluded", fits.len())));
    }
    Ok(FilterOutcome { terms, observations, exclusions })
}

//! Sampling networks from a dyad-independent ERGM: exactly, dyad by dyad, or
//! by a single-toggle Metropolis chain that can also enforce an out-degree
//! cap. Also synthetic attribute generation and goodness of fit.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AttributeTable, DirectedNetwork, NodeAttributes};
use crate::num::{log_sum_exp, Real};
use crate::rng::{stream_rng, Rng};
use crate::terms::{BoundModel, ModelSpec, DYAD_STATES};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetropolisConfig {
    /// Defaults to 10·n².
    pub burn_in: Option<usize>,
    /// Defaults to n².
    pub thinning: Option<usize>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub n: usize,
    pub theta: Vec<T>,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outdegree_cap: Option<usize>,
    #[serde(default)]
    pub metropolis: MetropolisConfig,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n: usize, model: ModelSpec, theta: Vec<T>, seed: u64) -> Self {
        Self { n, theta, model, seed, outdegree_cap: None, metropolis: MetropolisConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if self.theta.len() != self.model.len() {
            return Err(Error::InvalidConfig(format!(
                "theta has {} entries but the model has {} terms",
                self.theta.len(),
                self.model.len()
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("theta must be finite".into()));
        }
        Ok(())
    }

    fn bind(&self, attrs: &AttributeTable) -> Result<BoundModel<T>> {
        self.validate()?;
        if attrs.len() != self.n {
            return Err(Error::InvalidConfig(format!(
                "attribute table has {} rows, config asks for {} nodes",
                attrs.len(),
                self.n
            )));
        }
        BoundModel::bind(&self.model, attrs)
    }
}

/// Pre-computed dyad-state probabilities for repeated exact draws.
#[derive(Debug, Clone)]
pub struct ExactSampler<T> {
    template: DirectedNetwork,
    /// Per dyad (i, j, cumulative probabilities of states 0..3).
    dyads: Vec<(usize, usize, [T; DYAD_STATES])>,
}

impl<T: Real> ExactSampler<T> {
    pub fn new(bound: &BoundModel<T>, theta: &[T]) -> Self {
        let dyads = bound
            .all_dyads()
            .into_iter()
            .map(|(i, j, d)| {
                let lw = d.log_weights(theta);
                let lse = log_sum_exp(&lw);
                let mut cum = [T::zero(); DYAD_STATES];
                let mut acc = T::zero();
                for s in 0..DYAD_STATES {
                    acc = acc + (lw[s] - lse).exp();
                    cum[s] = acc;
                }
                (i, j, cum)
            })
            .collect();
        Self { template: DirectedNetwork::with_size(bound.node_count()), dyads }
    }

    /// Use `template`'s ids and labels for drawn networks. Its ties are ignored.
    pub fn with_template(mut self, template: &DirectedNetwork) -> Self {
        assert_eq!(template.n(), self.template.n());
        let mut t = template.clone();
        for (i, j) in template.ties() {
            t.remove_tie(i, j).expect("valid tie");
        }
        self.template = t;
        self
    }

    pub fn draw(&self, rng: &mut Rng) -> DirectedNetwork {
        let mut net = self.template.clone();
        for &(i, j, cum) in &self.dyads {
            let u = T::lit(rng.random::<f64>());
            let state = cum.iter().position(|&c| u < c).unwrap_or(DYAD_STATES - 1);
            if state & 1 != 0 {
                net.add_tie(i, j).expect("i ≠ j");
            }
            if state & 2 != 0 {
                net.add_tie(j, i).expect("i ≠ j");
            }
        }
        net
    }

    /// `count` independent draws; draw `k` uses stream `k` of `seed`.
    pub fn draw_many(&self, seed: u64, count: usize) -> Vec<DirectedNetwork> {
        (0..count)
            .into_par_iter()
            .map(|k| self.draw(&mut stream_rng(seed, k as u64)))
            .collect()
    }
}

/// One exact draw: each dyad independently takes one of its four states.
pub fn sample_exact<T: Real>(config: &SimConfig<T>, attrs: &AttributeTable) -> Result<DirectedNetwork> {
    if let Some(cap) = config.outdegree_cap {
        return Err(Error::UnsupportedConstraint(format!(
            "out-degree cap {cap} requires the Metropolis sampler"
        )));
    }
    let bound = config.bind(attrs)?;
    Ok(ExactSampler::new(&bound, &config.theta).draw(&mut stream_rng(config.seed, 0)))
}

/// Single-tie-toggle Metropolis chain started from the empty graph. With an
/// out-degree cap, proposals that would exceed it are rejected, so the chain
/// targets the ERGM conditioned on the cap.
pub fn sample_metropolis<T: Real>(config: &SimConfig<T>, attrs: &AttributeTable) -> Result<Vec<DirectedNetwork>> {
    let bound = config.bind(attrs)?;
    let m = &config.metropolis;
    if m.sample_count == 0 {
        return Err(Error::EmptyRequest("sample_count must be positive".into()));
    }
    let n = config.n;
    let burn_in = m.burn_in.unwrap_or(10 * n * n);
    let thinning = m.thinning.unwrap_or(n * n).max(1);
    // θᵀδ for toggling i→j on = η_ij + θ_mutual·y_ji
    let mut eta = vec![T::zero(); n * n];
    for (i, j, d) in bound.all_dyads() {
        let (a, b, _) = d.predictors(&config.theta);
        eta[i * n + j] = a;
        eta[j * n + i] = b;
    }
    let theta_mutual = bound.mutual_index().map_or(T::zero(), |k| config.theta[k]);

    let mut rng = stream_rng(config.seed, 0);
    let mut net = DirectedNetwork::with_size(n);
    let mut out = Vec::with_capacity(m.sample_count);
    let total = burn_in + thinning * m.sample_count;
    for step in 1..=total {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let present = net.has_tie(i, j);
        let mut delta = eta[i * n + j];
        if net.has_tie(j, i) {
            delta = delta + theta_mutual;
        }
        let log_ratio = if present { -delta } else { delta };
        let blocked = !present && config.outdegree_cap.is_some_and(|cap| net.out_degree(i) >= cap);
        if !blocked {
            let u: f64 = rng.random();
            if T::lit(u).ln() < log_ratio {
                net.toggle(i, j).expect("i ≠ j");
            }
        }
        if step > burn_in && (step - burn_in).is_multiple_of(thinning) {
            out.push(net.clone());
        }
    }
    Ok(out)
}

/// Distributions of synthetic covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeSpec {
    pub female_probability: f64,
    pub skills_mean: f64,
    pub skills_sd: f64,
    pub perceived_mean: f64,
    pub perceived_sd: f64,
}

impl Default for AttributeSpec {
    fn default() -> Self {
        Self { female_probability: 0.5, skills_mean: 0.45, skills_sd: 0.1, perceived_mean: 0.46, perceived_sd: 0.15 }
    }
}

fn truncated_unit(dist: &Normal<f64>, rng: &mut Rng) -> f64 {
    loop {
        let x = dist.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

/// Synthetic node covariates: Bernoulli gender and truncated-normal skills.
pub fn generate_attributes(n: usize, seed: u64, spec: &AttributeSpec) -> Result<AttributeTable> {
    let skills = Normal::new(spec.skills_mean, spec.skills_sd)
        .map_err(|e| Error::InvalidConfig(format!("skills distribution: {e}")))?;
    let perceived = Normal::new(spec.perceived_mean, spec.perceived_sd)
        .map_err(|e| Error::InvalidConfig(format!("perceived skills distribution: {e}")))?;
    let mut rng = stream_rng(seed, 0);
    let rows = (0..n)
        .map(|_| NodeAttributes {
            female: Some(rng.random::<f64>() < spec.female_probability),
            skills: Some(truncated_unit(&skills, &mut rng)),
            perceived_skills: Some(truncated_unit(&perceived, &mut rng)),
            ..Default::default()
        })
        .collect();
    Ok(AttributeTable::new(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofRecord {
    pub term: String,
    pub observed: f64,
    pub simulated_mean: f64,
    pub simulated_sd: f64,
    /// Mid-rank of the observed value in the simulated distribution, in [0, 1].
    pub quantile: f64,
}

pub const DEFAULT_GOF_REPLICATES: usize = 1000;

/// Compares observed sufficient statistics with their distribution under
/// exact simulation at `theta`.
pub fn gof<T: Real>(
    network: &DirectedNetwork,
    attrs: &AttributeTable,
    model: &ModelSpec,
    theta: &[T],
    seed: u64,
    replicates: usize,
) -> Result<Vec<GofRecord>> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidConfig("goodness of fit needs a finite theta".into()));
    }
    if replicates == 0 {
        return Err(Error::EmptyRequest("replicates must be positive".into()));
    }
    let bound = BoundModel::<T>::bind(model, attrs)?;
    if theta.len() != bound.len() {
        return Err(Error::InvalidConfig("theta length does not match the model".into()));
    }
    let observed: Vec<f64> = bound.sufficient_stats(network).into_iter().map(Real::as_f64).collect();
    let sims: Vec<Vec<f64>> = ExactSampler::new(&bound, theta)
        .draw_many(seed, replicates)
        .iter()
        .map(|g| bound.sufficient_stats(g).into_iter().map(Real::as_f64).collect())
        .collect();
    let r = replicates as f64;
    Ok(model
        .term_names()
        .into_iter()
        .enumerate()
        .map(|(k, term)| {
            let values: Vec<f64> = sims.iter().map(|s| s[k]).collect();
            let mean = values.iter().sum::<f64>() / r;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
            let obs = observed[k];
            let below = values.iter().filter(|&&v| v < obs).count() as f64;
            let ties = values.iter().filter(|&&v| v == obs).count() as f64;
            GofRecord {
                term,
                observed: obs,
                simulated_mean: mean,
                simulated_sd: var.sqrt(),
                quantile: (below + 0.5 * ties) / r,
            }
        })
        .collect())
}

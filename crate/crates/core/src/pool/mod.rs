//! Hierarchical random-effects pooling of per-network coefficients:
//!
//! ```text
//! θ̂_k   ~ N(θ_k, σ_k²)
//! θ_k   ~ N(μ_c(k), τ²)
//! μ_c   ~ N(α_c, s²)            s = `mu_sd`, 1 by default
//! α_c   ~ N(0, τ_country²)
//! τ, τ_country ~ HalfCauchy(0, scale)
//! ```
//!
//! Given (τ, τ_country) the remaining parameters are jointly Gaussian, so
//! each Gibbs sweep slice-samples log τ and log τ_country from their
//! collapsed conditionals and then draws (α, μ, θ) exactly. The headline
//! pooled effect is the precision-weighted average of the μ_c draws, the
//! weights being the conditional posterior precisions of μ_c.

mod diagnostics;
mod slice;

pub use diagnostics::{diagnostics, quantile_sorted, ChainDiagnostics};
pub use slice::SliceSampler;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{stream_rng, Rng};

/// R-hat above this attaches a non-convergence warning.
pub const RHAT_WARNING: f64 = 1.05;

/// One network's estimate of one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectObservation<T> {
    pub network_id: String,
    pub country: String,
    pub term: String,
    pub estimate: T,
    pub std_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    pub chains: usize,
    /// Per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    pub tau_scale: f64,
    pub tau_country_scale: f64,
    /// Conditional standard deviation of μ_c around α_c.
    pub mu_sd: f64,
    /// Clamp τ instead of sampling it (0 gives a common-effect model).
    pub fixed_tau: Option<f64>,
    pub fixed_tau_country: Option<f64>,
    /// Clamp every α_c to this value.
    pub fixed_alpha: Option<f64>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 5000,
            warmup: 2500,
            seed: 0,
            tau_scale: 1.0,
            tau_country_scale: 1.0,
            mu_sd: 1.0,
            fixed_tau: None,
            fixed_tau_country: None,
            fixed_alpha: None,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.chains < 2 {
            return bad("pooling needs at least 2 chains");
        }
        if self.warmup >= self.iterations {
            return bad("warmup must be smaller than iterations");
        }
        if self.iterations - self.warmup < 4 {
            return bad("at least 4 post-warmup draws are needed per chain");
        }
        for (name, v) in [("tau_scale", self.tau_scale), ("tau_country_scale", self.tau_country_scale), ("mu_sd", self.mu_sd)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        for (name, v) in [("fixed_tau", self.fixed_tau), ("fixed_tau_country", self.fixed_tau_country)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{name} must be non-negative and finite")));
                }
            }
        }
        Ok(())
    }

    pub fn kept_draws(&self) -> usize {
        self.iterations - self.warmup
    }
}

/// Posterior mean, spread and 95% equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryEffect {
    pub country: String,
    pub networks: usize,
    pub mu: ParameterSummary,
    pub alpha: ParameterSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkEffect {
    pub network_id: String,
    pub country: String,
    pub estimate: f64,
    pub std_error: f64,
    pub theta: ParameterSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDiagnostics {
    pub parameter: String,
    #[serde(flatten)]
    pub diagnostics: ChainDiagnostics,
}

/// Post-warmup draws: `values[chain][parameter][iteration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws<T> {
    pub parameters: Vec<String>,
    pub values: Vec<Vec<Vec<T>>>,
}

impl<T: Real> Draws<T> {
    pub fn parameter(&self, name: &str) -> Option<Vec<Vec<T>>> {
        let k = self.parameters.iter().position(|p| p == name)?;
        Some(self.values.iter().map(|c| c[k].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary<T> {
    pub term: String,
    pub n_observations: usize,
    /// Precision-weighted average of the country effects.
    pub pooled: ParameterSummary,
    pub tau: ParameterSummary,
    pub tau_country: ParameterSummary,
    pub countries: Vec<CountryEffect>,
    pub networks: Vec<NetworkEffect>,
    pub diagnostics: Vec<ParameterDiagnostics>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub draws: Draws<T>,
}

impl<T> PosteriorSummary<T> {
    pub fn max_r_hat(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.diagnostics.r_hat).reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.diagnostics.ess_bulk).reduce(f64::min)
    }

    pub fn has_convergence_warning(&self) -> bool {
        self.max_r_hat().is_some_and(|r| r > RHAT_WARNING)
    }
}

/// Inverse-variance weighted mean and its standard error.
pub fn fixed_effect_reference<T: Real>(observations: &[EffectObservation<T>]) -> Result<(T, T)> {
    if observations.is_empty() {
        return Err(Error::EmptyPool("no observations".into()));
    }
    let (mut wsum, mut wx) = (T::zero(), T::zero());
    for o in observations {
        let w = (o.std_error * o.std_error).recip();
        wsum = wsum + w;
        wx = wx + w * o.estimate;
    }
    Ok((wx / wsum, wsum.sqrt().recip()))
}

/// Observations grouped by country, canonically ordered.
struct Groups<T> {
    countries: Vec<String>,
    /// (estimate, variance) per observation, grouped by country.
    members: Vec<Vec<(T, T)>>,
    labels: Vec<Vec<(String, String)>>,
}

impl<T: Real> Groups<T> {
    fn new(observations: &[EffectObservation<T>]) -> Self {
        let mut by_country: BTreeMap<&str, Vec<&EffectObservation<T>>> = BTreeMap::new();
        for o in observations {
            by_country.entry(o.country.as_str()).or_default().push(o);
        }
        let mut countries = Vec::new();
        let mut members = Vec::new();
        let mut labels = Vec::new();
        for (country, mut obs) in by_country {
            obs.sort_by(|a, b| a.network_id.cmp(&b.network_id));
            countries.push(country.to_string());
            members.push(obs.iter().map(|o| (o.estimate, o.std_error * o.std_error)).collect());
            labels.push(obs.iter().map(|o| (o.network_id.clone(), o.country.clone())).collect());
        }
        Self { countries, members, labels }
    }

    fn observation_count(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }
}

/// Model constants in the working precision.
struct Model<T> {
    mu_var: T,
    tau_scale: T,
    tau_country_scale: T,
    fixed_tau: Option<T>,
    fixed_tau_country: Option<T>,
    fixed_alpha: Option<T>,
}

/// Country-level sufficient statistics at a given τ: data precision P_c and
/// precision-weighted mean m_c.
fn country_stats<T: Real>(members: &[(T, T)], tau: T) -> (T, T) {
    let tau2 = tau * tau;
    let (mut p, mut s) = (T::zero(), T::zero());
    for &(est, var) in members {
        let w = (var + tau2).recip();
        p = p + w;
        s = s + w * est;
    }
    (p, s / p)
}

fn log_half_cauchy<T: Real>(x: T, scale: T) -> T {
    let z = x / scale;
    -(T::one() + z * z).ln() - scale.ln() + T::lit((2.0 / PI).ln())
}

impl<T: Real> Model<T> {
    /// Prior of μ_c with α_c integrated out: (center, variance).
    fn mu_prior(&self, tau_country: T) -> (T, T) {
        match self.fixed_alpha {
            Some(a) => (a, self.mu_var),
            None => (T::zero(), self.mu_var + tau_country * tau_country),
        }
    }

    /// log p(θ̂ | τ, τ_country) with θ, μ and α integrated out.
    fn log_marginal(&self, groups: &Groups<T>, tau: T, tau_country: T) -> T {
        let (center, v) = self.mu_prior(tau_country);
        let tau2 = tau * tau;
        let half = T::lit(0.5);
        let two_pi = T::lit(2.0 * PI);
        let mut total = T::zero();
        for members in &groups.members {
            let (mut p, mut s1, mut s2, mut logdet) = (T::zero(), T::zero(), T::zero(), T::zero());
            for &(est, var) in members {
                let d = var + tau2;
                let r = est - center;
                p = p + d.recip();
                s1 = s1 + r / d;
                s2 = s2 + r * r / d;
                logdet = logdet + (two_pi * d).ln();
            }
            total = total - half * (logdet + (v * p).ln_1p() + s2 - s1 * s1 / (p + v.recip()));
        }
        total
    }
}

struct ChainOutput<T> {
    /// [parameter][iteration]
    draws: Vec<Vec<T>>,
    /// Rao–Blackwellized conditional means and variances, same layout as the
    /// first `1 + 2C + K` parameters (pooled, μ_c, θ_k).
    cond_mean: Vec<Vec<T>>,
    cond_var: Vec<Vec<T>>,
}

fn normal<T: Real>(rng: &mut Rng, mean: T, var: T) -> T {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * T::lit(z)
}

fn run_chain<T: Real>(model: &Model<T>, groups: &Groups<T>, config: &PoolConfig, chain: usize) -> ChainOutput<T> {
    let mut rng = stream_rng(config.seed, chain as u64);
    let n_c = groups.countries.len();
    let n_k = groups.observation_count();
    // parameter layout: pooled, tau, tau_country, mu[c].., alpha[c].., theta[k]..
    let n_par = 3 + 2 * n_c + n_k;
    let kept = config.kept_draws();
    let mut draws = vec![Vec::with_capacity(kept); n_par];
    let n_rb = 1 + n_c + n_k;
    let mut cond_mean = vec![Vec::with_capacity(kept); n_rb];
    let mut cond_var = vec![Vec::with_capacity(kept); n_rb];

    // overdispersed starts on the log scale
    let mut start = |scale: T| scale * T::lit((rng.random::<f64>() * 6.0 - 3.0).exp());
    let mut tau = model.fixed_tau.unwrap_or_else(|| start(model.tau_scale));
    let mut tau_country = model.fixed_tau_country.unwrap_or_else(|| start(model.tau_country_scale));
    let slice = SliceSampler::<T>::default();

    for iter in 0..config.iterations {
        if model.fixed_tau.is_none() {
            let u = slice.step(
                tau.ln(),
                |u| {
                    let t = u.exp();
                    model.log_marginal(groups, t, tau_country) + log_half_cauchy(t, model.tau_scale) + u
                },
                &mut rng,
            );
            tau = u.exp();
        }
        if model.fixed_tau_country.is_none() {
            if model.fixed_alpha.is_some() {
                // τ_country no longer touches the data: draw from its prior
                let c: f64 = rand_distr::Cauchy::new(0.0, 1.0).expect("valid").sample(&mut rng);
                tau_country = model.tau_country_scale * T::lit(c.abs());
            } else {
                let v = slice.step(
                    tau_country.ln(),
                    |v| {
                        let t = v.exp();
                        model.log_marginal(groups, tau, t) + log_half_cauchy(t, model.tau_country_scale) + v
                    },
                    &mut rng,
                );
                tau_country = v.exp();
            }
        }

        let keep = iter >= config.warmup;
        let tau2 = tau * tau;
        let (mu_center, mu_prior_var) = model.mu_prior(tau_country);
        let mut mus = Vec::with_capacity(n_c);
        let mut alphas = Vec::with_capacity(n_c);
        let mut thetas = Vec::with_capacity(n_k);
        let mut rb_mu = Vec::with_capacity(n_c);
        let mut rb_theta = Vec::with_capacity(n_k);
        let (mut wsum, mut w_mu, mut w_rb) = (T::zero(), T::zero(), T::zero());
        for members in &groups.members {
            let (p, m) = country_stats(members, tau);
            let alpha = match model.fixed_alpha {
                Some(a) => a,
                None => {
                    let v = model.mu_var + p.recip();
                    let prec = (tau_country * tau_country).recip() + v.recip();
                    normal(&mut rng, (m / v) / prec, prec.recip())
                }
            };
            let mu_prec = model.mu_var.recip() + p;
            let mu = normal(&mut rng, (alpha / model.mu_var + p * m) / mu_prec, mu_prec.recip());
            // μ_c given (τ, τ_country) only
            let post_prec = mu_prior_var.recip() + p;
            let post_mean = (mu_center / mu_prior_var + p * m) / post_prec;
            wsum = wsum + post_prec;
            w_mu = w_mu + post_prec * mu;
            w_rb = w_rb + post_prec * post_mean;
            for &(est, var) in members {
                if tau2 > T::zero() {
                    let prec = var.recip() + tau2.recip();
                    thetas.push(normal(&mut rng, (est / var + mu / tau2) / prec, prec.recip()));
                    let shrink = tau2.recip() / prec;
                    let mean = (est / var) / prec + shrink * post_mean;
                    rb_theta.push((mean, prec.recip() + shrink * shrink / post_prec));
                } else {
                    thetas.push(mu);
                    rb_theta.push((post_mean, post_prec.recip()));
                }
            }
            mus.push(mu);
            alphas.push(alpha);
            rb_mu.push((post_mean, post_prec.recip()));
        }
        if !keep {
            continue;
        }
        let pooled = w_mu / wsum;
        let values = std::iter::once(pooled)
            .chain([tau, tau_country])
            .chain(mus.iter().copied())
            .chain(alphas.iter().copied())
            .chain(thetas.iter().copied());
        for (slot, v) in draws.iter_mut().zip(values) {
            slot.push(v);
        }
        let rb = std::iter::once((w_rb / wsum, wsum.recip()))
            .chain(rb_mu.iter().copied())
            .chain(rb_theta.iter().copied());
        for ((m_slot, v_slot), (m, v)) in cond_mean.iter_mut().zip(cond_var.iter_mut()).zip(rb) {
            m_slot.push(m);
            v_slot.push(v);
        }
    }
    ChainOutput { draws, cond_mean, cond_var }
}

/// Per-chain conditional means and variances of one parameter.
type Conditionals<'a, T> = (&'a [&'a Vec<T>], &'a [&'a Vec<T>]);

fn summarize<T: Real>(chains: &[&Vec<T>], rao_blackwell: Option<Conditionals<'_, T>>) -> ParameterSummary {
    let mut all: Vec<f64> = chains.iter().flat_map(|c| c.iter().map(|x| x.as_f64())).collect();
    let n = all.len() as f64;
    let (mean, var) = match rao_blackwell {
        Some((means, vars)) => {
            let m: Vec<f64> = means.iter().flat_map(|c| c.iter().map(|x| x.as_f64())).collect();
            let v: f64 = vars.iter().flat_map(|c| c.iter().map(|x| x.as_f64())).sum::<f64>() / n;
            let mean = m.iter().sum::<f64>() / n;
            let between = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, v + between)
        }
        None => {
            let mean = all.iter().sum::<f64>() / n;
            (mean, all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0))
        }
    };
    all.sort_by(f64::total_cmp);
    ParameterSummary {
        mean,
        sd: var.max(0.0).sqrt(),
        median: quantile_sorted(&all, 0.5),
        ci_lower: quantile_sorted(&all, 0.025),
        ci_upper: quantile_sorted(&all, 0.975),
    }
}

/// Samples the pooling posterior for the observations of one term.
pub fn pool<T: Real>(observations: &[EffectObservation<T>], config: &PoolConfig) -> Result<PosteriorSummary<T>> {
    config.validate()?;
    let Some(first) = observations.first() else {
        return Err(Error::EmptyPool("no observations to pool".into()));
    };
    for o in observations {
        if o.term != first.term {
            return Err(Error::InvalidConfig(format!("cannot pool `{}` with `{}`", o.term, first.term)));
        }
        if !(o.std_error > T::zero() && o.std_error.is_finite()) {
            return Err(Error::InvalidObservation {
                network: o.network_id.clone(),
                msg: format!("standard error must be positive and finite, got {}", o.std_error),
            });
        }
        if !o.estimate.is_finite() {
            return Err(Error::InvalidObservation { network: o.network_id.clone(), msg: "estimate is not finite".into() });
        }
    }
    let groups = Groups::new(observations);
    let model = Model {
        mu_var: T::lit(config.mu_sd * config.mu_sd),
        tau_scale: T::lit(config.tau_scale),
        tau_country_scale: T::lit(config.tau_country_scale),
        fixed_tau: config.fixed_tau.map(T::lit),
        fixed_tau_country: config.fixed_tau_country.map(T::lit),
        fixed_alpha: config.fixed_alpha.map(T::lit),
    };

    let outputs: Vec<ChainOutput<T>> =
        (0..config.chains).into_par_iter().map(|c| run_chain(&model, &groups, config, c)).collect();

    let n_c = groups.countries.len();
    let mut names = vec!["pooled".to_string(), "tau".into(), "tau_country".into()];
    names.extend(groups.countries.iter().map(|c| format!("mu[{c}]")));
    names.extend(groups.countries.iter().map(|c| format!("alpha[{c}]")));
    names.extend(groups.labels.iter().flatten().map(|(id, _)| format!("theta[{id}]")));

    let column = |k: usize| -> Vec<&Vec<T>> { outputs.iter().map(|o| &o.draws[k]).collect() };
    let rb = |k: usize| -> (Vec<&Vec<T>>, Vec<&Vec<T>>) {
        (outputs.iter().map(|o| &o.cond_mean[k]).collect(), outputs.iter().map(|o| &o.cond_var[k]).collect())
    };
    let summary_rb = |draw_k: usize, rb_k: usize| {
        let (m, v) = rb(rb_k);
        summarize(&column(draw_k), Some((&m, &v)))
    };

    let pooled = summary_rb(0, 0);
    let tau = summarize(&column(1), None);
    let tau_country = summarize(&column(2), None);
    let countries = groups
        .countries
        .iter()
        .enumerate()
        .map(|(c, name)| CountryEffect {
            country: name.clone(),
            networks: groups.members[c].len(),
            mu: summary_rb(3 + c, 1 + c),
            alpha: summarize(&column(3 + n_c + c), None),
        })
        .collect();
    let members: Vec<(T, T)> = groups.members.iter().flatten().copied().collect();
    let networks = groups
        .labels
        .iter()
        .flatten()
        .zip(&members)
        .enumerate()
        .map(|(k, ((id, country), &(est, var)))| NetworkEffect {
            network_id: id.clone(),
            country: country.clone(),
            estimate: est.as_f64(),
            std_error: var.sqrt().as_f64(),
            theta: summary_rb(3 + 2 * n_c + k, 1 + n_c + k),
        })
        .collect();

    let mut diags = Vec::with_capacity(names.len());
    let mut warnings = Vec::new();
    if groups.observation_count() < 2 {
        warnings.push(format!("only {} observation(s); heterogeneity is prior-driven", groups.observation_count()));
    }
    for (k, name) in names.iter().enumerate() {
        let chains: Vec<Vec<T>> = column(k).into_iter().cloned().collect();
        let d = diagnostics(&chains)?;
        if let Some(r) = d.r_hat.filter(|&r| r > RHAT_WARNING) {
            warnings.push(format!("R-hat {r:.3} for {name} exceeds {RHAT_WARNING}"));
        }
        diags.push(ParameterDiagnostics { parameter: name.clone(), diagnostics: d });
    }
    for w in &warnings {
        log::warn!("{}: {w}", first.term);
    }

    let draws = Draws { parameters: names, values: outputs.into_iter().map(|o| o.draws).collect() };
    Ok(PosteriorSummary {
        term: first.term.clone(),
        n_observations: groups.observation_count(),
        pooled,
        tau,
        tau_country,
        countries,
        networks,
        diagnostics: diags,
        warnings,
        draws,
    })
}

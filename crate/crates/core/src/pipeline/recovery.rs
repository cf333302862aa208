use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::format_sig3;
use super::simulate::{simulate_batch, SimulateConfig};
use crate::error::{Error, Result};
use crate::fit::{filter_fits, Estimator, FilterOptions, FitOptions, FitResult};
use crate::network::Attribute;
use crate::pool::{pool, PoolConfig};
use crate::rng::child_seed;
use crate::sim::AttributeSpec;
use crate::terms::{ModelSpec, TermKind};

/// Pools smaller than this get a warning.
pub const SMALL_POOL: usize = 10;

/// Generating value per term: density and reciprocity near the hypothesis
/// models, covariate effects at the seeking-network estimates.
pub fn default_theta(model: &ModelSpec) -> Vec<f64> {
    use Attribute::*;
    model
        .terms()
        .iter()
        .map(|t| match t {
            TermKind::Edges => -3.3,
            TermKind::Mutual => 2.8,
            TermKind::NodeOCov(Skills) => -0.95,
            TermKind::NodeICov(Skills) => 0.47,
            TermKind::NodeOCov(PerceivedSkills) => 0.12,
            TermKind::NodeICov(PerceivedSkills) => 0.0,
            TermKind::AbsDiff(Skills) => -0.42,
            TermKind::NodeOCov(Female) => 0.18,
            TermKind::NodeICov(Female) => 0.07,
            TermKind::NodeMatch(Female) => 1.05,
            _ => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub model: ModelSpec,
    /// Defaults to [`default_theta`].
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,
    pub networks: usize,
    pub nodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "four")]
    pub countries: usize,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub filter: FilterOptions,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub attributes: AttributeSpec,
}

fn one() -> usize {
    1
}

fn four() -> usize {
    4
}

impl RecoveryConfig {
    pub fn new(model: ModelSpec, networks: usize, nodes: usize, seed: u64) -> Self {
        Self {
            model,
            theta_true: None,
            networks,
            nodes,
            seed,
            replications: 1,
            countries: 4,
            estimator: Estimator::Exact,
            filter: FilterOptions::default(),
            pool: PoolConfig::default(),
            attributes: AttributeSpec::default(),
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        self.theta_true.clone().unwrap_or_else(|| default_theta(&self.model))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermRecovery {
    pub term: String,
    pub label: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Fraction of replications whose 95% interval covers the truth.
    pub coverage: f64,
    pub mean_ci_lower: f64,
    pub mean_ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub replications: usize,
    pub networks: usize,
    pub nodes: usize,
    pub seed: u64,
    pub terms: Vec<TermRecovery>,
    /// Networks excluded by the filter, summed over replications.
    pub excluded: usize,
    pub max_r_hat: Option<f64>,
    pub warnings: Vec<String>,
}

impl RecoveryReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "Recovery study: {} replication(s), {} networks of {} nodes, seed {}\n",
            self.replications, self.networks, self.nodes, self.seed
        );
        let _ = writeln!(s, "{:<40} {:>8} {:>9} {:>8} {:>8} {:>8}", "term", "truth", "estimate", "bias", "rmse", "coverage");
        for t in &self.terms {
            let _ = writeln!(
                s,
                "{:<40} {:>8} {:>9} {:>8} {:>8} {:>8.2}",
                t.label,
                format_sig3(t.truth),
                format_sig3(t.mean_estimate),
                format_sig3(t.bias),
                format_sig3(t.rmse),
                t.coverage
            );
        }
        let _ = writeln!(s, "excluded networks: {}", self.excluded);
        if let Some(r) = self.max_r_hat {
            let _ = writeln!(s, "max R-hat: {r:.4}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// One replication's pooled (mean, lower, upper) per term.
type Replicate = (Vec<(f64, f64, f64)>, usize, Option<f64>);

fn replicate(cfg: &RecoveryConfig, theta: &[f64], seed: u64) -> Result<Replicate> {
    let sim = SimulateConfig {
        countries: cfg.countries,
        attributes: cfg.attributes.clone(),
        ..SimulateConfig::new(cfg.nodes, cfg.model.clone(), theta.to_vec(), cfg.networks, seed)
    };
    let batch = simulate_batch(&sim)?;
    let fit_opts = FitOptions::default();
    let fits: Vec<FitResult<f64>> = batch
        .par_iter()
        .filter_map(|(net, attrs)| match cfg.estimator.fit(net, attrs, &cfg.model, &fit_opts) {
            Ok(f) => Some(f),
            Err(e) => {
                log::info!("recovery: fit of {} failed: {e}", net.network_id);
                None
            }
        })
        .collect();
    let outcome = filter_fits(&fits, &cfg.filter)?;
    let excluded = cfg.networks - outcome.network_count();
    let posts: Vec<_> = outcome
        .terms
        .par_iter()
        .enumerate()
        .map(|(t, term)| pool(&outcome.for_term(term), &PoolConfig { seed: child_seed(seed, 1000 + t as u64), ..cfg.pool.clone() }))
        .collect::<Result<_>>()?;
    let max_r_hat = posts.iter().filter_map(|p| p.max_r_hat()).reduce(f64::max);
    Ok((posts.iter().map(|p| (p.pooled.mean, p.pooled.ci_lower, p.pooled.ci_upper)).collect(), excluded, max_r_hat))
}

/// Simulates batches at a known θ, runs fit, filter and pool on each, and
/// summarizes how well the pooled estimates recover θ.
pub fn recovery_study(cfg: &RecoveryConfig) -> Result<RecoveryReport> {
    let theta = cfg.theta();
    if theta.len() != cfg.model.len() {
        return Err(Error::InvalidConfig(format!(
            "theta has {} entries but the model has {} terms",
            theta.len(),
            cfg.model.len()
        )));
    }
    if cfg.replications == 0 {
        return Err(Error::EmptyRequest("replications must be positive".into()));
    }
    let mut warnings = Vec::new();
    if cfg.networks < SMALL_POOL {
        let w = format!("small pool: only {} networks per replication", cfg.networks);
        log::warn!("{w}");
        warnings.push(w);
    }
    let reps: Vec<Replicate> = (0..cfg.replications)
        .map(|r| replicate(cfg, &theta, child_seed(cfg.seed, r as u64)))
        .collect::<Result<_>>()?;
    let r = reps.len() as f64;
    let terms = cfg
        .model
        .terms()
        .iter()
        .enumerate()
        .map(|(k, term)| {
            let truth = theta[k];
            let est: Vec<(f64, f64, f64)> = reps.iter().map(|(v, _, _)| v[k]).collect();
            let mean_estimate = est.iter().map(|e| e.0).sum::<f64>() / r;
            TermRecovery {
                term: term.name(),
                label: term.label(),
                truth,
                mean_estimate,
                bias: mean_estimate - truth,
                rmse: (est.iter().map(|e| (e.0 - truth).powi(2)).sum::<f64>() / r).sqrt(),
                coverage: est.iter().filter(|e| e.1 <= truth && truth <= e.2).count() as f64 / r,
                mean_ci_lower: est.iter().map(|e| e.1).sum::<f64>() / r,
                mean_ci_upper: est.iter().map(|e| e.2).sum::<f64>() / r,
            }
        })
        .collect();
    Ok(RecoveryReport {
        replications: cfg.replications,
        networks: cfg.networks,
        nodes: cfg.nodes,
        seed: cfg.seed,
        terms,
        excluded: reps.iter().map(|x| x.1).sum(),
        max_r_hat: reps.iter().filter_map(|x| x.2).reduce(f64::max),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Preset;

    fn fast_pool() -> PoolConfig {
        PoolConfig { iterations: 1000, warmup: 500, ..Default::default() }
    }

    #[test]
    fn default_theta_matches_model_length() {
        for p in [Preset::Rq1, Preset::Rq2, Preset::H1, Preset::H2] {
            let m = ModelSpec::preset(p);
            assert_eq!(default_theta(&m).len(), m.len());
        }
        assert_eq!(default_theta(&ModelSpec::preset(Preset::H2)), vec![-3.3, 2.8, 1.05]);
    }

    #[test]
    fn small_pool_runs_and_warns() {
        let cfg = RecoveryConfig {
            theta_true: Some(vec![-1.0, 0.5, 0.3]),
            pool: fast_pool(),
            countries: 1,
            ..RecoveryConfig::new(ModelSpec::preset(Preset::H1), 2, 12, 4)
        };
        let report = recovery_study(&cfg).unwrap();
        assert_eq!(report.terms.len(), 3);
        assert!(report.warnings.iter().any(|w| w.contains("small pool")));
        assert!(report.render().contains("Receiver effect of being female"));
    }

    #[test]
    fn theta_length_is_checked() {
        let cfg = RecoveryConfig { theta_true: Some(vec![0.0]), ..RecoveryConfig::new(ModelSpec::preset(Preset::H1), 2, 5, 0) };
        assert!(matches!(recovery_study(&cfg), Err(Error::InvalidConfig(_))));
    }
}

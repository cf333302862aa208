//! Rank-normalized split R-hat and bulk effective sample size.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    /// `None` when every draw is identical.
    pub r_hat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Splits every chain into two halves, dropping the middle draw of odd chains.
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [c[..half].to_vec(), c[c.len() - half..].to_vec()]
        })
        .collect()
}

/// Replaces draws by normal scores of their pooled (average) ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut flat: Vec<(f64, usize)> = chains.iter().flatten().copied().zip(0..).collect();
    flat.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = flat.len();
    let mut ranks = vec![0.0; total];
    let mut start = 0;
    while start < total {
        let mut end = start;
        while end + 1 < total && flat[end + 1].0 == flat[start].0 {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for item in &flat[start..=end] {
            ranks[item.1] = avg;
        }
        start = end + 1;
    }
    let normal = Normal::standard();
    let s = total as f64;
    let mut out = Vec::with_capacity(chains.len());
    let mut k = 0;
    for c in chains {
        out.push(
            c.iter()
                .map(|_| {
                    let z = normal.inverse_cdf((ranks[k] - 0.375) / (s + 0.25));
                    k += 1;
                    z
                })
                .collect(),
        );
    }
    out
}

fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let between_over_n = variance(&means);
    let var_plus = (n - 1.0) / n * within + between_over_n;
    (var_plus / within).sqrt()
}

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64
}

/// Geyer initial-monotone-sequence ESS over multiple chains.
fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let var_plus = (nf - 1.0) / nf * within + if chains.len() > 1 { variance(&means) } else { 0.0 };
    let rho = |lag: usize| -> f64 {
        let acov = mean(&chains.iter().map(|c| autocovariance(c, lag)).collect::<Vec<_>>());
        1.0 - (within - acov) / var_plus
    };
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (m * nf).log10());
    m * nf / tau
}

/// Split R-hat (max of bulk and folded rank-normalized versions) and bulk
/// ESS for one parameter.
pub fn diagnostics<T: Real>(chains: &[Vec<T>]) -> Result<ChainDiagnostics> {
    if chains.len() < 2 {
        return Err(Error::InvalidConfig(format!("diagnostics need at least 2 chains, got {}", chains.len())));
    }
    let len = chains[0].len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidConfig("diagnostics need ≥ 4 draws per chain and equal chain lengths".into()));
    }
    let chains: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| x.as_f64()).collect()).collect();
    let first = chains[0][0];
    if chains.iter().flatten().all(|&x| x == first) {
        return Ok(ChainDiagnostics { r_hat: None, ess_bulk: None, degenerate: true });
    }
    let halves = split(&chains);
    let z = rank_normalize(&halves);
    let bulk = basic_rhat(&z);
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let median = quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|x| (x - median).abs()).collect()).collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    Ok(ChainDiagnostics { r_hat: Some(bulk.max(tail)), ess_bulk: Some(ess(&z)), degenerate: false })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chains(offsets: &[f64], len: usize, seed: u64) -> Vec<Vec<f64>> {
        offsets
            .iter()
            .enumerate()
            .map(|(c, &o)| {
                let mut rng = stream_rng(seed, c as u64);
                (0..len).map(|_| o + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect::<Vec<f64>>()
            })
            .collect()
    }

    #[test]
    fn iid_chains_are_converged() {
        let d = diagnostics(&normal_chains(&[0.0; 4], 2500, 3)).unwrap();
        let r = d.r_hat.unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
        let ess = d.ess_bulk.unwrap();
        assert!((ess - 10_000.0).abs() < 2_000.0, "{ess}");
    }

    #[test]
    fn separated_chains_are_flagged() {
        let d = diagnostics(&normal_chains(&[-5.0, 5.0], 500, 4)).unwrap();
        assert!(d.r_hat.unwrap() > 1.5);
    }

    #[test]
    fn autocorrelated_chain_has_lower_ess() {
        let mut rng = stream_rng(5, 0);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..2000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = diagnostics(&chains).unwrap().ess_bulk.unwrap();
        // AR(1) with φ = 0.9: ESS ≈ N (1 − φ)/(1 + φ) ≈ 421
        assert!(ess > 250.0 && ess < 650.0, "{ess}");
    }

    #[test]
    fn constant_chain_is_degenerate() {
        let d = diagnostics(&[vec![1.0; 10], vec![1.0; 10]]).unwrap();
        assert!(d.degenerate && d.r_hat.is_none());
        assert!(diagnostics(&[vec![1.0, 2.0, 3.0, 4.0]]).is_err());
        assert!(diagnostics(&[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    }
}

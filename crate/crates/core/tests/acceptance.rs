//! Acceptance criteria. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line, and exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use ergmpool::fit::DyadLikelihood;
use ergmpool::network::{AttributeTable, NodeAttributes};
use ergmpool::pipeline::{run, simulate, Manifest, NetworkType, RunOptions, SimulateConfig};
use ergmpool::pool::diagnostics;
use ergmpool::rng::{child_seed, stream_rng};
use ergmpool::sim::{ExactSampler, MetropolisConfig};
use ergmpool::terms::{dyad_state, BoundModel};
use ergmpool::*;
use num_rational::BigRational;
use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{random_attributes, random_network, random_theta, PRESETS};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    (m, v)
}

fn chi_square_p(counts: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Exact MLE against brute-force enumeration on tiny networks.
fn exact_matches_enumeration() -> Verdict {
    const PER_PRESET: usize = 50;
    let opts = FitOptions::default();
    let mut compared = 0;
    let mut worst_theta: f64 = 0.0;
    let mut worst_ll: f64 = 0.0;
    let mut mismatched = Vec::new();
    for (p, &preset) in PRESETS.iter().enumerate() {
        let model = ModelSpec::preset(preset);
        let results: Vec<_> = (0..400u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(1000 + p as u64, k);
                let n = 3 + (k as usize % 2);
                let density = 0.2 + 0.6 * rng.random::<f64>();
                let net = random_network(n, density, &mut rng);
                let attrs = random_attributes(n, &mut rng);
                let a: Result<Fit> = fit_exact(&net, &attrs, &model, &opts);
                let b: Result<Fit> = brute_force_mle(&net, &attrs, &model, &opts);
                (k, a, b)
            })
            .collect();
        let mut here = 0;
        for (k, a, b) in results {
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    here += 1;
                    worst_theta = worst_theta.max(max_abs_diff(&a.theta, &b.theta));
                    worst_ll = worst_ll.max((a.log_likelihood - b.log_likelihood).abs());
                }
                (Err(a), Err(b)) if a.to_string() == b.to_string() => {}
                (a, b) => mismatched.push(format!("{preset}#{k}: {:?} vs {:?}", a.map(|f| f.theta), b.map(|f| f.theta))),
            }
            if here >= PER_PRESET {
                break;
            }
        }
        compared += here;
    }
    let pass = compared >= 4 * PER_PRESET && mismatched.is_empty() && worst_theta < 1e-6 && worst_ll < 1e-8;
    Verdict::new(
        pass,
        format!(
            "{compared} instances, max |dtheta| {worst_theta:.2e}, max |dloglik| {worst_ll:.2e}, {} outcome mismatches {:?}",
            mismatched.len(),
            &mismatched[..mismatched.len().min(3)]
        ),
    )
}

/// Closed-form references: logit density and the fixed-effect average.
fn closed_forms() -> Verdict {
    let mut worst: f64 = 0.0;
    let model = ModelSpec::custom(vec![TermKind::Edges]).unwrap();
    let mut rng = stream_rng(2, 0);
    for _ in 0..50 {
        let n = rng.random_range(3..12);
        let net = random_network(n, 0.1 + 0.8 * rng.random::<f64>(), &mut rng);
        let ties = net.edge_count();
        if ties == 0 || ties == n * (n - 1) {
            continue;
        }
        let attrs = random_attributes(n, &mut rng);
        let fit: Fit = fit_exact(&net, &attrs, &model, &FitOptions::default()).unwrap();
        let d = ties as f64 / (n * (n - 1)) as f64;
        worst = worst.max((fit.theta[0] - (d / (1.0 - d)).ln()).abs());
    }
    let obs: Vec<Observation> = [(1.0, 1.0), (3.0, 1.0)]
        .iter()
        .enumerate()
        .map(|(k, &(estimate, std_error))| EffectObservation {
            network_id: format!("n{k}"),
            country: "A".into(),
            term: "edges".into(),
            estimate,
            std_error,
        })
        .collect();
    let (m, se) = fixed_effect_reference(&obs).unwrap();
    let pass = worst < 1e-9 && (m - 2.0).abs() < 1e-4 && (se - 0.5_f64.sqrt()).abs() < 1e-4;
    Verdict::new(pass, format!("max |theta - logit(density)| {worst:.2e}, fixed effect {m:.6} (se {se:.6})"))
}

/// Change statistics equal the exact difference of sufficient statistics.
fn change_statistics_exact() -> Verdict {
    let failures: usize = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(3, k);
            let n = rng.random_range(3..=10);
            let model = ModelSpec::preset(PRESETS[k as usize % 4]);
            // rational covariates keep every statistic exact
            let rows = (0..n)
                .map(|i| NodeAttributes {
                    female: Some(if i < 2 { i == 0 } else { rng.random::<bool>() }),
                    skills: Some(rng.random_range(0..=20) as f64 / 20.0),
                    perceived_skills: Some(rng.random_range(0..=16) as f64 / 16.0),
                    ..Default::default()
                })
                .collect();
            let attrs = AttributeTable::new(rows);
            let mut net = random_network(n, rng.random::<f64>(), &mut rng);
            let mut bad = 0;
            for _ in 0..50 {
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                let before: Vec<BigRational> = sufficient_stats(&net, &attrs, &model).unwrap();
                let present = net.toggle(i, j).unwrap();
                let after: Vec<BigRational> = sufficient_stats(&net, &attrs, &model).unwrap();
                let (with, without) = if present { (after, before) } else { (before, after) };
                let mut off = net.clone();
                off.remove_tie(i, j).unwrap();
                let delta: Vec<BigRational> = change_stats(&off, &attrs, &model, i, j).unwrap();
                let diff: Vec<BigRational> = with.iter().zip(&without).map(|(a, b)| a - b).collect();
                if diff != delta {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    Verdict::new(failures == 0, format!("10000 toggles, {failures} exact mismatches"))
}

/// Exact sampler against analytic dyad probabilities, and against Metropolis.
fn samplers_agree() -> Verdict {
    // n = 2, h1: edges, mutual, nodeicov.female with node 0 female
    let theta = [-0.5, 1.2, 0.4];
    let attrs = AttributeTable::new(vec![
        NodeAttributes { female: Some(true), ..Default::default() },
        NodeAttributes { female: Some(false), ..Default::default() },
    ]);
    let model = ModelSpec::preset(Preset::H1);
    let bound = BoundModel::<f64>::bind(&model, &attrs).unwrap();
    let draws = ExactSampler::new(&bound, &theta).draw_many(41, 100_000);
    let mut counts = [0.0; 4];
    for d in &draws {
        counts[dyad_state(d, 0, 1)] += 1.0;
    }
    // tie 0→1 points at a non-female receiver, 1→0 at a female one
    let a = theta[0];
    let b = theta[0] + theta[2];
    let w = [1.0, a.exp(), b.exp(), (a + b + theta[1]).exp()];
    let z: f64 = w.iter().sum();
    let expected: Vec<f64> = w.iter().map(|x| x / z * draws.len() as f64).collect();
    let p_chi = chi_square_p(&counts, &expected);

    // n = 6, h2, exact vs multi-chain Metropolis statistic means
    let mut rng = stream_rng(4, 0);
    let attrs = random_attributes(6, &mut rng);
    let model = ModelSpec::preset(Preset::H2);
    let theta = vec![-1.0, 1.5, 0.7];
    let bound = BoundModel::<f64>::bind(&model, &attrs).unwrap();
    let exact: Vec<Vec<f64>> =
        ExactSampler::new(&bound, &theta).draw_many(42, 20_000).iter().map(|g| bound.sufficient_stats(g)).collect();
    let chains: Vec<Vec<Vec<f64>>> = (0..4u64)
        .into_par_iter()
        .map(|c| {
            let mut cfg = SimConfig::new(6, model.clone(), theta.clone(), 500 + c);
            cfg.metropolis = MetropolisConfig { sample_count: 5000, ..Default::default() };
            sample_metropolis(&cfg, &attrs).unwrap().iter().map(|g| bound.sufficient_stats(g)).collect()
        })
        .collect();
    let mut worst_z: f64 = 0.0;
    for k in 0..theta.len() {
        let e: Vec<f64> = exact.iter().map(|s| s[k]).collect();
        let (me, ve) = mean_var(&e);
        let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|s| s[k]).collect()).collect();
        let flat: Vec<f64> = per_chain.iter().flatten().copied().collect();
        let (mm, vm) = mean_var(&flat);
        let ess = diagnostics(&per_chain).unwrap().ess_bulk.unwrap_or(flat.len() as f64);
        let se = (ve / e.len() as f64 + vm / ess).sqrt();
        worst_z = worst_z.max((me - mm).abs() / se);
    }
    let pass = p_chi > 0.01 && worst_z < 3.0;
    Verdict::new(pass, format!("dyad-state chi-square p = {p_chi:.3}, max |exact - metropolis| = {worst_z:.2} MCSE"))
}

/// Analytic gradient against central finite differences.
fn gradient_check() -> Verdict {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(5, k);
            let n = rng.random_range(4..10);
            let model = ModelSpec::preset(PRESETS[k as usize % 4]);
            let net = random_network(n, 0.1 + 0.6 * rng.random::<f64>(), &mut rng);
            let attrs = random_attributes(n, &mut rng);
            let lik = DyadLikelihood::<f64>::new(&net, &attrs, &model).unwrap();
            let theta = random_theta(model.len(), 2.0, &mut rng);
            let g = lik.gradient(&theta);
            let h = 1e-5;
            let fd: Vec<f64> = (0..theta.len())
                .map(|i| {
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[i] += h;
                    dn[i] -= h;
                    (lik.log_likelihood(&up) - lik.log_likelihood(&dn)) / (2.0 * h)
                })
                .collect();
            let scale = g.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            max_abs_diff(&g, &fd) / scale
        })
        .reduce(|| 0.0, f64::max);
    Verdict::new(worst < 1e-5, format!("100 points, max relative error {worst:.2e}"))
}

fn observation(k: usize, country: &str, estimate: f64, std_error: f64) -> Observation {
    EffectObservation { network_id: format!("n{k:03}"), country: country.into(), term: "x".into(), estimate, std_error }
}

/// Pooling reduces to the fixed-effect average and to the conjugate posterior.
fn pooling_limits() -> Verdict {
    let mut worst: f64 = 0.0;
    for case in 0..10u64 {
        let mut rng = stream_rng(6, case);
        let obs: Vec<Observation> = (0..rng.random_range(2..12))
            .map(|k| observation(k, "A", rng.random_range(-2.0..2.0), rng.random_range(0.2..1.0)))
            .collect();
        let cfg = PoolConfig {
            fixed_tau: Some(0.0),
            fixed_tau_country: Some(0.0),
            mu_sd: 1e4,
            seed: case,
            iterations: 2000,
            warmup: 1000,
            ..Default::default()
        };
        let post: Posterior = pool(&obs, &cfg).unwrap();
        let (fe, _) = fixed_effect_reference(&obs).unwrap();
        worst = worst.max((post.pooled.mean - fe).abs());
    }
    let cfg = PoolConfig {
        fixed_tau: Some(0.0),
        fixed_tau_country: Some(0.0),
        fixed_alpha: Some(0.0),
        seed: 7,
        ..Default::default()
    };
    let post: Posterior = pool(&[observation(0, "A", 1.0, 1.0)], &cfg).unwrap();
    let chains = post.draws.parameter("pooled").unwrap();
    let flat: Vec<f64> = chains.iter().flatten().copied().collect();
    let (m, v) = mean_var(&flat);
    let ess = diagnostics(&chains).unwrap().ess_bulk.unwrap_or(0.0);
    let mean_ok = (m - 0.5).abs() < 4.0 * (0.5 / ess).sqrt();
    let var_ok = (v - 0.5).abs() < 4.0 * 0.5 * (2.0 / ess).sqrt();
    let pass = worst < 1e-3 && mean_ok && var_ok && ess >= 1000.0;
    Verdict::new(
        pass,
        format!("max |pooled - fixed effect| {worst:.2e}; single observation mean {m:.4}, variance {v:.4}, ESS {ess:.0}"),
    )
}

fn quick_manifest(dir: &Path, cfg: SimulateConfig, models: Vec<ModelSpec>) -> Manifest {
    let cfg = SimulateConfig { output_dir: dir.to_path_buf(), ..cfg };
    simulate(&cfg).unwrap();
    let mut m = Manifest::load(&dir.join("manifest.json")).unwrap();
    m.models = models;
    m
}

/// Simulate then estimate: the pooled estimates recover the generating values.
fn end_to_end_recovery() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let truth = vec![-3.3, 2.8, 1.05];
    let cfg = SimulateConfig { countries: 4, ..SimulateConfig::new(20, ModelSpec::preset(Preset::H2), truth.clone(), 100, 2024) };
    let m = quick_manifest(dir.path(), cfg, vec![ModelSpec::preset(Preset::H2)]);
    let outcome = run(&m, &RunOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut pass = elapsed < 300.0;
    let mut parts = Vec::new();
    for (t, &truth) in outcome.pooled.terms.iter().zip(&truth) {
        let covered = t.ci_lower <= truth && truth <= t.ci_upper;
        let bias = t.mean - truth;
        pass &= covered && bias.abs() < 0.1;
        parts.push(format!("{} {:.3} [{:.3}, {:.3}] bias {bias:+.3}", t.term, t.mean, t.ci_lower, t.ci_upper));
    }
    pass &= outcome.pooled.terms.len() == truth.len();
    Verdict::new(pass, format!("{}; {elapsed:.0}s", parts.join(", ")))
}

/// Simulation-based calibration of the hierarchical pooling model.
fn calibration() -> Verdict {
    const REPS: u64 = 100;
    const THINNED: usize = 99;
    let countries = ["C1", "C2", "C3"];
    let config = PoolConfig::default();
    let results: Vec<(usize, usize, f64, f64)> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(8, rep);
            let half_cauchy = Cauchy::<f64>::new(0.0, 1.0).unwrap();
            let tau: f64 = half_cauchy.sample(&mut rng).abs() * config.tau_scale;
            let tau_c: f64 = half_cauchy.sample(&mut rng).abs() * config.tau_country_scale;
            let mut obs = Vec::new();
            let mut mus = Vec::new();
            let mut weights = Vec::new();
            for c in countries {
                let alpha = Normal::new(0.0, tau_c).unwrap().sample(&mut rng);
                let mu = Normal::new(alpha, config.mu_sd).unwrap().sample(&mut rng);
                let mut precision = 0.0;
                for _ in 0..5 {
                    let se: f64 = rng.random_range(0.2..0.8);
                    let theta = Normal::new(mu, tau).unwrap().sample(&mut rng);
                    let estimate = Normal::new(theta, se).unwrap().sample(&mut rng);
                    precision += 1.0 / (se * se + tau * tau);
                    obs.push(observation(obs.len(), c, estimate, se));
                }
                mus.push(mu);
                weights.push(1.0 / (config.mu_sd.powi(2) + tau_c * tau_c) + precision);
            }
            let pooled_true = mus.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>() / weights.iter().sum::<f64>();
            let post: Posterior = pool(&obs, &PoolConfig { seed: child_seed(88, rep), ..config.clone() }).unwrap();
            let rank = |name: &str, truth: f64| {
                let flat: Vec<f64> = post.draws.parameter(name).unwrap().into_iter().flatten().collect();
                let stride = flat.len() / THINNED;
                (0..THINNED).filter(|&k| flat[k * stride + stride / 2] < truth).count()
            };
            (
                rank("mu[C1]", mus[0]),
                rank("pooled", pooled_true),
                post.max_r_hat().unwrap_or(f64::INFINITY),
                post.min_ess().unwrap_or(0.0),
            )
        })
        .collect();
    let p_value = |ranks: Vec<usize>| {
        let mut bins = [0.0; 10];
        for r in ranks {
            bins[r * 10 / (THINNED + 1)] += 1.0;
        }
        chi_square_p(&bins, &[REPS as f64 / 10.0; 10])
    };
    let p_mu = p_value(results.iter().map(|r| r.0).collect());
    let p_pooled = p_value(results.iter().map(|r| r.1).collect());
    let max_rhat = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let min_ess = results.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let pass = p_mu > 0.01 && p_pooled > 0.01 && max_rhat < 1.05 && min_ess > 400.0;
    Verdict::new(
        pass,
        format!("rank uniformity p = {p_mu:.3} (mu), {p_pooled:.3} (pooled); max R-hat {max_rhat:.4}, min ESS {min_ess:.0}"),
    )
}

/// `number [number, number]`
fn is_estimate_cell(cell: &str) -> bool {
    let num = |s: &str| s.parse::<f64>().is_ok_and(f64::is_finite);
    let Some((mean, rest)) = cell.split_once(" [") else { return false };
    let Some(inner) = rest.strip_suffix(']') else { return false };
    let Some((lo, hi)) = inner.split_once(", ") else { return false };
    num(mean) && num(lo) && num(hi)
}

fn report_rows(report: &str, group: &str) -> Vec<Vec<String>> {
    report
        .lines()
        .filter(|l| l.starts_with(&format!("{group} ")))
        .map(|l| l.split("  ").map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .collect()
}

/// The hypothesis rows of the report table.
fn report_layout() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimulateConfig {
        countries: 3,
        network_types: vec![NetworkType::Seeking, NetworkType::Giving],
        ..SimulateConfig::new(15, ModelSpec::preset(Preset::H2), vec![-2.0, 1.5, 0.8], 30, 9)
    };
    let m = quick_manifest(dir.path(), cfg, vec![ModelSpec::preset(Preset::H1), ModelSpec::preset(Preset::H2)]);
    let outcome = run(&m, &RunOptions::default()).unwrap();
    let report = fs::read_to_string(outcome.output_dir.join("report.txt")).unwrap();
    let header_ok = report.lines().any(|l| {
        let cols: Vec<&str> = l.split_whitespace().collect();
        cols == ["Group", "Parameter", "Seeking", "Giving"]
    });
    let expected = [
        ("H1", ["Density", "Reciprocity", "Receiver effect of being female"]),
        ("H2", ["Density", "Reciprocity", "Same-gender preference (homophily)"]),
    ];
    let mut problems = Vec::new();
    for (group, labels) in expected {
        let rows = report_rows(&report, group);
        let names: Vec<&str> = rows.iter().map(|r| r.get(1).map_or("", String::as_str)).collect();
        if names != labels {
            problems.push(format!("{group} rows {names:?}"));
        }
        for r in &rows {
            if r.len() != 4 || !is_estimate_cell(&r[2]) || !is_estimate_cell(&r[3]) {
                problems.push(format!("malformed row {r:?}"));
            }
        }
    }
    if !header_ok {
        problems.push("missing column header".into());
    }
    let detail = if problems.is_empty() { "6 rows with seeking and giving cells".to_string() } else { problems.join("; ") };
    Verdict::new(problems.is_empty(), detail)
}

fn output_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Same inputs, seed and any worker count give byte-identical outputs.
fn reproducibility() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimulateConfig {
        countries: 3,
        network_types: vec![NetworkType::Seeking, NetworkType::Giving],
        ..SimulateConfig::new(12, ModelSpec::preset(Preset::H1), vec![-2.0, 1.5, 0.3], 20, 10)
    };
    let mut m = quick_manifest(dir.path(), cfg, vec![ModelSpec::preset(Preset::H1), ModelSpec::preset(Preset::H2)]);
    m.write_draws = true;
    m.pool.iterations = 2000;
    m.pool.warmup = 1000;
    let outputs: Vec<_> = [Some(1), Some(1), Some(4), None]
        .into_iter()
        .enumerate()
        .map(|(k, workers)| {
            m.output_dir = dir.path().join(format!("out{k}"));
            let outcome = run(&m, &RunOptions { workers, ..Default::default() }).unwrap();
            output_files(&outcome.output_dir)
        })
        .collect();
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    Verdict::new(identical, format!("4 runs (workers 1, 1, 4, default), {} files each", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("exact MLE matches enumeration", exact_matches_enumeration),
        ("closed-form references", closed_forms),
        ("change statistics", change_statistics_exact),
        ("sampler correctness", samplers_agree),
        ("likelihood gradient", gradient_check),
        ("pooling limits", pooling_limits),
        ("end-to-end recovery", end_to_end_recovery),
        ("pooling calibration", calibration),
        ("report layout", report_layout),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name}: {} ({:.1}s)", k + 1, v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

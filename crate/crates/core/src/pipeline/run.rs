use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{forest_rows, render_csv, render_svg};
use super::manifest::{Manifest, NetworkType};
use super::report::{group_label, ReportRow, ReportTable};
use crate::error::{Error, Result};
use crate::fit::{filter_fits, FitOptions, FitResult};
use crate::impute::{impute_attributes, ImputeOptions};
use crate::io::{read_attributes, read_edges, read_ratings, write_attributes, write_text, NetworkAttributes};
use crate::network::{derive_composite_skills, derive_perceived_skills, mean_incoming_ratings, AttributeTable, DirectedNetwork};
use crate::pool::{fixed_effect_reference, pool, CountryEffect, PoolConfig, PosteriorSummary};
use crate::rng::child_seed;
use crate::sim::{gof, GofRecord};
use crate::terms::{ModelSpec, Preset};

pub const FITS_HEADER: &str = "network_id,country,model,term,estimate,std_error,converged,separation,loglik";

const IMPUTE_STREAM: u64 = 1;
const POOL_STREAM: u64 = 2;
const GOF_STREAM: u64 = 3;

/// Command-line overrides of manifest settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Threads for fitting and pooling; `None` uses the rayon default.
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub imputations: Option<usize>,
}

/// One pooled term of one model on one network type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PooledTerm {
    pub network_type: NetworkType,
    pub model: Preset,
    pub model_tag: String,
    pub term: String,
    pub label: String,
    pub group: String,
    pub networks_in: usize,
    pub observations: usize,
    pub excluded: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub tau_median: f64,
    pub tau_country_median: f64,
    pub max_r_hat: Option<f64>,
    pub min_ess_bulk: Option<f64>,
    pub fixed_effect_mean: f64,
    pub fixed_effect_se: f64,
    pub pool_seed: u64,
    pub countries: Vec<CountryEffect>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionRecord {
    pub network_type: NetworkType,
    pub model_tag: String,
    pub network_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PooledFile {
    pub version: String,
    pub seed: u64,
    pub terms: Vec<PooledTerm>,
    pub exclusions: Vec<ExclusionRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub pooled: PooledFile,
    pub report: ReportTable,
    pub warnings: Vec<String>,
    /// Pooled terms whose R-hat exceeds the warning threshold.
    pub convergence_warnings: usize,
}

impl RunOutcome {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && self.convergence_warnings > 0 {
            super::exit::STRICT_WARNINGS
        } else {
            super::exit::SUCCESS
        }
    }
}

/// Unique file-safe tag per model: the preset name, numbered on repeats.
fn model_tags(models: &[ModelSpec]) -> Vec<String> {
    models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let name = m.preset_kind().name();
            let repeats = models.iter().filter(|o| o.preset_kind() == m.preset_kind()).count();
            if repeats > 1 {
                let ordinal = models[..=k].iter().filter(|o| o.preset_kind() == m.preset_kind()).count();
                format!("{name}{ordinal}")
            } else {
                name.to_string()
            }
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Some((mean, var.sqrt()))
}

/// Ingested, derived and imputed inputs.
struct Prepared {
    rosters: Vec<NetworkAttributes>,
    /// Further completed tables when more than one imputation is requested.
    extra_imputations: Vec<Vec<AttributeTable>>,
    networks: BTreeMap<NetworkType, Vec<DirectedNetwork>>,
    log: Vec<String>,
}

fn prepare(manifest: &Manifest, seed: u64, imputations: usize) -> Result<Prepared> {
    let mut log = Vec::new();
    let mut rosters = read_attributes(&manifest.attributes)?;
    log.push(format!("networks: {}", rosters.len()));
    log.push(format!("nodes: {}", rosters.iter().map(|r| r.node_ids.len()).sum::<usize>()));

    // composite skills unless supplied
    let mut derived_skills = 0;
    for r in rosters.iter_mut() {
        for row in r.table.rows.iter_mut() {
            if row.skills.is_none() {
                row.skills = derive_composite_skills(&row.skill_items, manifest.zero_response);
                derived_skills += usize::from(row.skills.is_some());
            }
        }
    }
    log.push(format!("composite skills derived for {derived_skills} nodes (zero response: {:?})", manifest.zero_response));

    if let Some(path) = &manifest.ratings {
        let ratings = read_ratings(path, &rosters)?;
        let mut raw = Vec::new();
        for (r, list) in rosters.iter_mut().zip(&ratings) {
            let net = r.empty_network();
            raw.extend(mean_incoming_ratings(net.n(), list).into_iter().flatten());
            for (row, value) in r.table.rows.iter_mut().zip(derive_perceived_skills(&net, list)) {
                if row.perceived_skills.is_none() {
                    row.perceived_skills = value;
                }
            }
        }
        log.push(format!("ratings: {}", ratings.iter().map(|l| l.len()).sum::<usize>()));
        if let Some((m, sd)) = mean_sd(&raw) {
            let scaled: Vec<f64> = raw.iter().map(|&v| crate::network::rescale_unit(v)).collect();
            let (sm, ssd) = mean_sd(&scaled).expect("non-empty");
            log.push(format!("perceived skills, raw 1-5 scale: mean {m:.4}, sd {sd:.4}"));
            log.push(format!("perceived skills, 0-1 scale: mean {sm:.4}, sd {ssd:.4}"));
        }
    }

    let attrs = manifest.used_attributes();
    for a in &attrs {
        let missing: usize = rosters.iter().map(|r| r.table.column(*a).iter().filter(|v| v.is_none()).count()).sum();
        log.push(format!("missing {a} before imputation: {missing}"));
    }
    let mut extra_imputations = Vec::new();
    if !attrs.is_empty() {
        let originals: Vec<AttributeTable> = rosters.iter().map(|r| r.table.clone()).collect();
        for k in 0..imputations {
            let opts = ImputeOptions { iterations: manifest.imputation.iterations, seed: child_seed(child_seed(seed, IMPUTE_STREAM), k as u64) };
            let mut tables = originals.clone();
            impute_attributes(&mut tables, &attrs, &opts)?;
            log.push(format!("imputation {}: seed {}, {} sweeps", k + 1, opts.seed, opts.iterations));
            if k == 0 {
                for (r, t) in rosters.iter_mut().zip(tables) {
                    r.table = t;
                }
            } else {
                extra_imputations.push(tables);
            }
        }
    }

    let mut networks = BTreeMap::new();
    for (&kind, path) in &manifest.edges {
        let nets = read_edges(path, &rosters)?;
        log.push(format!("{kind} ties: {}", nets.iter().map(DirectedNetwork::edge_count).sum::<usize>()));
        networks.insert(kind, nets);
    }
    Ok(Prepared { rosters, extra_imputations, networks, log })
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidConfig("workers must be positive".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn fits_csv(fits: &[(String, FitResult<f64>)]) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for (tag, f) in fits {
        for (k, term) in f.terms.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                f.network_id,
                f.country,
                tag,
                term,
                f.theta[k],
                f.standard_errors[k],
                f.converged,
                f.separation_flag,
                f.log_likelihood
            );
        }
    }
    out
}

fn draws_csv(post: &PosteriorSummary<f64>) -> String {
    let mut out = String::from("term,chain,iteration,parameter,value\n");
    for (c, chain) in post.draws.values.iter().enumerate() {
        for (p, name) in post.draws.parameters.iter().enumerate() {
            for (i, v) in chain[p].iter().enumerate() {
                let _ = writeln!(out, "{},{c},{i},{name},{v}", post.term);
            }
        }
    }
    out
}

/// Runs the whole analysis described by `manifest` and writes its artifacts.
pub fn run(manifest: &Manifest, options: &RunOptions) -> Result<RunOutcome> {
    let mut manifest = manifest.clone();
    if let Some(s) = options.seed {
        manifest.seed = s;
    }
    if let Some(m) = options.imputations {
        manifest.imputation.imputations = m;
    }
    manifest.validate()?;
    let seed = manifest.seed;
    let tags = model_tags(&manifest.models);
    let workers = thread_pool(options.workers)?;

    let mut log = vec![format!("ergmpool {}", env!("CARGO_PKG_VERSION")), format!("seed: {seed}")];
    log.push(format!("estimator: {:?}", manifest.estimator));
    for (tag, m) in tags.iter().zip(&manifest.models) {
        log.push(format!("model {tag}: {}", m.term_names().join(", ")));
    }
    let prepared = prepare(&manifest, seed, manifest.imputation.imputations)?;
    log.extend(prepared.log.iter().cloned());

    // fit stage: every (type, model, network) task is independent
    let fit_opts = FitOptions::default();
    let mut tasks = Vec::new();
    for (&kind, nets) in &prepared.networks {
        for m in 0..manifest.models.len() {
            for k in 0..nets.len() {
                tasks.push((kind, m, k));
            }
        }
    }
    let results: Vec<Result<FitResult<f64>>> = workers.install(|| {
        tasks
            .par_iter()
            .map(|&(kind, m, k)| {
                manifest.estimator.fit(&prepared.networks[&kind][k], &prepared.rosters[k].table, &manifest.models[m], &fit_opts)
            })
            .collect()
    });

    let mut fits: BTreeMap<(NetworkType, usize), Vec<FitResult<f64>>> = BTreeMap::new();
    let mut exclusions = Vec::new();
    for (&(kind, m, k), res) in tasks.iter().zip(results) {
        match res {
            Ok(f) => fits.entry((kind, m)).or_default().push(f),
            Err(e) => exclusions.push(ExclusionRecord {
                network_type: kind,
                model_tag: tags[m].clone(),
                network_id: prepared.networks[&kind][k].network_id.clone(),
                reason: format!("fit failed: {e}"),
            }),
        }
    }

    // filter and pool
    let mut pool_jobs = Vec::new();
    for (&kind, nets) in &prepared.networks {
        for (m, tag) in tags.iter().enumerate() {
            let model_fits = fits.get(&(kind, m)).map(Vec::as_slice).unwrap_or(&[]);
            let outcome = filter_fits(model_fits, &manifest.filter).map_err(|e| match e {
                Error::EmptyPool(msg) => Error::EmptyPool(format!("{kind} networks, model {tag}: {msg}")),
                other => other,
            })?;
            exclusions.extend(outcome.exclusions.iter().map(|x| ExclusionRecord {
                network_type: kind,
                model_tag: tag.clone(),
                network_id: x.network_id.clone(),
                reason: x.reason.clone(),
            }));
            let excluded = nets.len() - outcome.network_count();
            for (t, term) in outcome.terms.iter().enumerate() {
                let type_index = NetworkType::ALL.iter().position(|x| *x == kind).unwrap_or(0) as u64;
                let pool_seed = child_seed(child_seed(child_seed(child_seed(seed, POOL_STREAM), type_index), m as u64), t as u64);
                pool_jobs.push((kind, m, t, term.clone(), outcome.for_term(term), nets.len(), excluded, pool_seed));
            }
        }
    }
    exclusions.sort_by(|a, b| {
        (a.network_type, &a.model_tag, &a.network_id).cmp(&(b.network_type, &b.model_tag, &b.network_id))
    });
    exclusions.dedup();

    let posteriors: Vec<Result<PosteriorSummary<f64>>> = workers.install(|| {
        pool_jobs
            .par_iter()
            .map(|(_, _, _, _, obs, _, _, pool_seed)| pool(obs, &PoolConfig { seed: *pool_seed, ..manifest.pool.clone() }))
            .collect()
    });

    let mut terms = Vec::new();
    let mut warnings = Vec::new();
    let mut convergence_warnings = 0;
    let mut draws = Vec::new();
    for ((kind, m, t, term, obs, networks_in, excluded, pool_seed), post) in pool_jobs.into_iter().zip(posteriors) {
        let post = post?;
        let kind_term = manifest.models[m].terms()[t];
        let (fe_mean, fe_se) = fixed_effect_reference(&obs)?;
        if post.has_convergence_warning() {
            convergence_warnings += 1;
        }
        warnings.extend(post.warnings.iter().map(|w| format!("{kind} {} {term}: {w}", tags[m])));
        if manifest.write_draws {
            draws.push((format!("draws_{kind}_{}.csv", tags[m]), draws_csv(&post)));
        }
        terms.push(PooledTerm {
            network_type: kind,
            model: manifest.models[m].preset_kind(),
            model_tag: tags[m].clone(),
            term,
            label: kind_term.label(),
            group: group_label(manifest.models[m].preset_kind(), kind_term).to_string(),
            networks_in,
            observations: post.n_observations,
            excluded,
            mean: post.pooled.mean,
            sd: post.pooled.sd,
            median: post.pooled.median,
            ci_lower: post.pooled.ci_lower,
            ci_upper: post.pooled.ci_upper,
            tau_median: post.tau.median,
            tau_country_median: post.tau_country.median,
            max_r_hat: post.max_r_hat(),
            min_ess_bulk: post.min_ess(),
            fixed_effect_mean: fe_mean,
            fixed_effect_se: fe_se,
            pool_seed,
            countries: post.countries.clone(),
            warnings: post.warnings.clone(),
        });
    }

    let mut report = ReportTable::default();
    for (m, model) in manifest.models.iter().enumerate() {
        for &term in model.terms() {
            let mut row = ReportRow::new(model.preset_kind(), term);
            for p in terms.iter().filter(|p| p.model_tag == tags[m] && p.term == term.name()) {
                row.set(p.network_type, p.mean, p.ci_lower, p.ci_upper);
            }
            report.rows.push(row);
        }
    }

    let pooled = PooledFile { version: env!("CARGO_PKG_VERSION").to_string(), seed, terms, exclusions };

    // all writes happen here, after the parallel stages
    let out = &manifest.output_dir;
    let rosters: Vec<DirectedNetwork> = prepared.rosters.iter().map(NetworkAttributes::empty_network).collect();
    write_attributes(&out.join("derived_attributes.csv"), rosters.iter().zip(prepared.rosters.iter().map(|r| &r.table)), true)?;
    for (k, tables) in prepared.extra_imputations.iter().enumerate() {
        let nets = &rosters;
        write_attributes(&out.join(format!("derived_attributes_imp{}.csv", k + 2)), nets.iter().zip(tables), true)?;
    }
    for &kind in prepared.networks.keys() {
        let rows: Vec<(String, FitResult<f64>)> = (0..manifest.models.len())
            .flat_map(|m| fits.get(&(kind, m)).into_iter().flatten().map(move |f| (m, f)))
            .map(|(m, f)| (tags[m].clone(), f.clone()))
            .collect();
        write_text(&out.join(format!("fits_{kind}.csv")), &fits_csv(&rows))?;
    }
    write_text(&out.join("pooled.json"), &(serde_json::to_string_pretty(&pooled)? + "\n"))?;
    write_text(&out.join("report.txt"), &report.render())?;
    let rows = forest_rows(&pooled)?;
    write_text(&out.join("forest.csv"), &render_csv(&rows))?;
    write_text(&out.join("forest.svg"), &render_svg(&rows))?;
    for (name, text) in &draws {
        write_text(&out.join(name), text)?;
    }

    for x in &pooled.exclusions {
        log.push(format!("excluded {} {} {}: {}", x.network_type, x.model_tag, x.network_id, x.reason));
    }
    for p in &pooled.terms {
        log.push(format!(
            "pooled {} {} {}: seed {}, {} in, {} pooled, {} excluded, max R-hat {}, min ESS {}",
            p.network_type,
            p.model_tag,
            p.term,
            p.pool_seed,
            p.networks_in,
            p.observations,
            p.excluded,
            p.max_r_hat.map_or("n/a".into(), |r| format!("{r:.4}")),
            p.min_ess_bulk.map_or("n/a".into(), |e| format!("{e:.0}")),
        ));
    }
    for w in &warnings {
        log.push(format!("warning: {w}"));
    }
    let mut log_text = log.join("\n");
    log_text.push('\n');
    write_text(&out.join("run.log"), &log_text)?;
    for line in &log {
        log::info!("{line}");
    }

    Ok(RunOutcome { output_dir: out.clone(), pooled, report, warnings, convergence_warnings })
}

/// Fits one network of the manifest's batch and checks the fit by simulation.
pub fn gof_network(
    manifest: &Manifest,
    network_id: &str,
    model: &ModelSpec,
    network_type: Option<NetworkType>,
    replicates: usize,
) -> Result<(FitResult<f64>, Vec<GofRecord>)> {
    manifest.validate()?;
    let prepared = prepare(manifest, manifest.seed, 1)?;
    let kind = match network_type {
        Some(k) => k,
        None => *prepared.networks.keys().next().expect("validated non-empty"),
    };
    let nets = prepared
        .networks
        .get(&kind)
        .ok_or_else(|| Error::InvalidConfig(format!("manifest has no {kind} edges")))?;
    let k = nets
        .iter()
        .position(|n| n.network_id == network_id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown network `{network_id}`")))?;
    let fit: FitResult<f64> = manifest.estimator.fit(&nets[k], &prepared.rosters[k].table, model, &FitOptions::default())?;
    let records = gof(&nets[k], &prepared.rosters[k].table, model, &fit.theta, child_seed(manifest.seed, GOF_STREAM), replicates)?;
    Ok((fit, records))
}

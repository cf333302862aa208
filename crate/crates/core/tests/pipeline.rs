use std::fs;
use std::path::Path;

use ergmpool::pipeline::{run, simulate, Manifest, NetworkType, RunOptions, SimulateConfig, FITS_HEADER};
use ergmpool::*;

fn quick_pool() -> PoolConfig {
    PoolConfig { iterations: 1200, warmup: 400, ..Default::default() }
}

/// Simulates a two-type batch and returns its manifest with fast pooling.
fn batch(dir: &Path, preset: Preset, theta: Vec<f64>, networks: usize, models: Vec<ModelSpec>) -> Manifest {
    let cfg = SimulateConfig {
        countries: 3,
        network_types: vec![NetworkType::Seeking, NetworkType::Giving],
        output_dir: dir.to_path_buf(),
        ..SimulateConfig::new(15, ModelSpec::preset(preset), theta, networks, 11)
    };
    simulate(&cfg).unwrap();
    let mut m = Manifest::load(&dir.join("manifest.json")).unwrap();
    m.models = models;
    m.pool = quick_pool();
    m
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let m = batch(dir.path(), Preset::H1, vec![-2.0, 1.5, 0.3], 12, vec![ModelSpec::preset(Preset::H1)]);
    let outcome = run(&m, &RunOptions::default()).unwrap();
    let out = &outcome.output_dir;
    for f in ["derived_attributes.csv", "fits_seeking.csv", "fits_giving.csv", "pooled.json", "report.txt", "forest.csv", "forest.svg", "run.log"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let fits = fs::read_to_string(out.join("fits_seeking.csv")).unwrap();
    assert_eq!(fits.lines().next().unwrap(), FITS_HEADER);
    let derived = fs::read_to_string(out.join("derived_attributes.csv")).unwrap();
    assert!(derived.lines().next().unwrap().ends_with("skills,perceived_skills"));
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("model h1: edges, mutual, nodeicov.female"));
    assert!(log.contains("seed: 11"));
    assert_eq!(outcome.pooled.terms.len(), 6);
}

#[test]
fn exclusions_are_accounted_for_per_term() {
    let dir = tempfile::tempdir().unwrap();
    // sparse networks: several will lack reciprocated ties and be excluded
    let m = batch(dir.path(), Preset::H1, vec![-3.5, 1.0, 0.0], 15, vec![ModelSpec::preset(Preset::H1)]);
    let outcome = run(&m, &RunOptions::default()).unwrap();
    for t in &outcome.pooled.terms {
        assert_eq!(t.networks_in, t.observations + t.excluded, "{t:?}");
        let logged = outcome
            .pooled
            .exclusions
            .iter()
            .filter(|x| x.network_type == t.network_type && x.model_tag == t.model_tag)
            .count();
        assert_eq!(logged, t.excluded);
    }
    assert!(outcome.pooled.terms.iter().any(|t| t.excluded > 0));
}

#[test]
fn report_lists_every_model_term_once_per_type() {
    let dir = tempfile::tempdir().unwrap();
    let models = vec![ModelSpec::preset(Preset::H1), ModelSpec::preset(Preset::H2)];
    let m = batch(dir.path(), Preset::H2, vec![-2.0, 1.5, 0.8], 12, models.clone());
    let outcome = run(&m, &RunOptions::default()).unwrap();
    let expected: usize = models.iter().map(ModelSpec::len).sum();
    assert_eq!(outcome.report.rows.len(), expected);
    for row in &outcome.report.rows {
        assert!(row.seeking.is_some() && row.giving.is_some());
    }
    let mut pooled: Vec<_> = outcome.pooled.terms.iter().map(|t| (t.network_type, t.model_tag.clone(), t.term.clone())).collect();
    let before = pooled.len();
    pooled.dedup();
    assert_eq!(before, pooled.len());
    assert_eq!(before, 2 * expected);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = batch(dir.path(), Preset::H2, vec![-2.0, 1.5, 0.8], 10, vec![ModelSpec::preset(Preset::H2)]);
    m.write_draws = true;
    m.output_dir = dir.path().join("one");
    run(&m, &RunOptions { workers: Some(1), ..Default::default() }).unwrap();
    m.output_dir = dir.path().join("many");
    run(&m, &RunOptions { workers: Some(4), ..Default::default() }).unwrap();
    let a = read_dir_sorted(&dir.path().join("one"));
    let b = read_dir_sorted(&dir.path().join("many"));
    assert_eq!(a.len(), b.len());
    for ((na, ca), (nb, cb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between worker counts");
    }
    assert!(a.iter().any(|(n, _)| n == "draws_seeking_h2.csv"));
}

#[test]
fn seed_override_changes_pooling_only_through_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = batch(dir.path(), Preset::H1, vec![-2.0, 1.5, 0.3], 8, vec![ModelSpec::preset(Preset::H1)]);
    m.output_dir = dir.path().join("a");
    let a = run(&m, &RunOptions { seed: Some(1), ..Default::default() }).unwrap();
    m.output_dir = dir.path().join("b");
    let b = run(&m, &RunOptions { seed: Some(2), ..Default::default() }).unwrap();
    assert_eq!(a.pooled.seed, 1);
    assert_ne!(a.pooled.terms[0].pool_seed, b.pooled.terms[0].pool_seed);
    let fits_a = fs::read(dir.path().join("a/fits_seeking.csv")).unwrap();
    let fits_b = fs::read(dir.path().join("b/fits_seeking.csv")).unwrap();
    assert_eq!(fits_a, fits_b);
}

#[test]
fn empty_pool_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    // empty networks separate for every model
    let mut m = batch(dir.path(), Preset::H1, vec![-2.0, 1.5, 0.3], 4, vec![ModelSpec::preset(Preset::H1)]);
    fs::write(dir.path().join("edges_seeking.csv"), "network_id,source,target\n").unwrap();
    m.edges.remove(&NetworkType::Giving);
    let err = run(&m, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyPool(_)), "{err}");
}

#[test]
fn schema_violations_name_the_offending_row() {
    let dir = tempfile::tempdir().unwrap();
    let m = batch(dir.path(), Preset::H1, vec![-2.0, 1.5, 0.3], 3, vec![ModelSpec::preset(Preset::H1)]);
    let edges = dir.path().join("edges_seeking.csv");
    let mut text = fs::read_to_string(&edges).unwrap();
    text.push_str("sim001,v01,v01\n");
    fs::write(&edges, &text).unwrap();
    let err = run(&m, &RunOptions::default()).unwrap_err();
    assert!(err.is_validation());
    let line = text.lines().count();
    assert!(err.to_string().contains(&format!(":{line}:")), "{err}");
}

#[test]
fn multiple_imputations_emit_extra_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let m = batch(dir.path(), Preset::H2, vec![-2.0, 1.5, 0.8], 6, vec![ModelSpec::preset(Preset::H2)]);
    // blank out some gender entries
    let attrs = dir.path().join("attributes.csv");
    let text = fs::read_to_string(&attrs).unwrap();
    let edited: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(k, l)| {
            if k > 0 && k % 7 == 0 {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells[4] = "";
                cells.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(&attrs, edited.join("\n") + "\n").unwrap();
    let outcome = run(&m, &RunOptions { imputations: Some(3), ..Default::default() }).unwrap();
    let out = outcome.output_dir;
    for f in ["derived_attributes.csv", "derived_attributes_imp2.csv", "derived_attributes_imp3.csv"] {
        let t = fs::read_to_string(out.join(f)).unwrap();
        assert!(t.lines().skip(1).all(|l| !l.split(',').nth(4).unwrap().is_empty()), "{f} still has missing gender");
    }
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("imputation 3"));
}

#[test]
fn perceived_skills_come_from_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let items: Vec<String> = (0..ergmpool::network::SKILL_ITEMS).map(ergmpool::io::item_header).collect();
    let blanks = ",".repeat(items.len());
    let mut attrs = format!("network_id,node_id,country,wave,female,{}\n", items.join(","));
    for (id, f) in [("A", 1), ("B", 0), ("C", 1), ("X", 0)] {
        attrs.push_str(&format!("c1,{id},DE,1,{f}{blanks}\n"));
    }
    fs::write(dir.path().join("attributes.csv"), attrs).unwrap();
    fs::write(dir.path().join("edges.csv"), "network_id,source,target\nc1,A,X\nc1,X,A\nc1,B,C\n").unwrap();
    fs::write(dir.path().join("ratings.csv"), "network_id,rater,target,score\nc1,A,X,2\nc1,B,X,3\nc1,C,X,5\n").unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        r#"{"attributes": "attributes.csv", "ratings": "ratings.csv", "edges": {"seeking": "edges.csv"}, "models": [{"model": "h1"}], "pool": {"iterations": 600, "warmup": 200}, "filter": {"exclude_separated": false}}"#,
    )
    .unwrap();
    let m = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    let outcome = run(&m, &RunOptions::default()).unwrap();
    let derived = fs::read_to_string(outcome.output_dir.join("derived_attributes.csv")).unwrap();
    let x = derived.lines().find(|l| l.starts_with("c1,X,")).unwrap();
    let perceived: f64 = x.rsplit(',').next().unwrap().parse().unwrap();
    assert!((perceived - (10.0 / 3.0 - 1.0) / 4.0).abs() < 1e-12);
    let log = fs::read_to_string(outcome.output_dir.join("run.log")).unwrap();
    assert!(log.contains("perceived skills, raw 1-5 scale"));
}

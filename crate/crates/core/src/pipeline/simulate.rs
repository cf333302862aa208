use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, NetworkType};
use crate::error::{Error, Result};
use crate::io::{write_attributes, write_edges, write_text};
use crate::network::{AttributeTable, DirectedNetwork};
use crate::rng::{child_seed, stream_rng};
use crate::sim::{generate_attributes, sample_metropolis, AttributeSpec, ExactSampler, MetropolisConfig, SimConfig};
use crate::terms::{BoundModel, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationSampler {
    /// Exact dyad-wise draws; the default unless an out-degree cap is set.
    #[default]
    Exact,
    Metropolis,
}

/// Batch simulation settings as accepted by the `simulate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub n: usize,
    pub model: ModelSpec,
    pub theta: Vec<f64>,
    #[serde(default = "one")]
    pub networks: usize,
    #[serde(default = "one")]
    pub countries: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outdegree_cap: Option<usize>,
    #[serde(default)]
    pub sampler: Option<SimulationSampler>,
    #[serde(default)]
    pub metropolis: MetropolisConfig,
    #[serde(default)]
    pub attributes: AttributeSpec,
    /// One edge file per type, all over the same rosters.
    #[serde(default = "default_types")]
    pub network_types: Vec<NetworkType>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_types() -> Vec<NetworkType> {
    vec![NetworkType::Seeking]
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("simulated")
}

impl SimulateConfig {
    pub fn new(n: usize, model: ModelSpec, theta: Vec<f64>, networks: usize, seed: u64) -> Self {
        Self {
            n,
            model,
            theta,
            networks,
            countries: 1,
            seed,
            outdegree_cap: None,
            sampler: None,
            metropolis: MetropolisConfig::default(),
            attributes: AttributeSpec::default(),
            network_types: default_types(),
            output_dir: default_output(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if cfg.output_dir.is_relative() {
            cfg.output_dir = path.parent().unwrap_or(Path::new("")).join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn sampler(&self) -> SimulationSampler {
        self.sampler.unwrap_or(if self.outdegree_cap.is_some() {
            SimulationSampler::Metropolis
        } else {
            SimulationSampler::Exact
        })
    }

    fn validate(&self) -> Result<()> {
        if self.networks == 0 {
            return Err(Error::EmptyRequest("networks must be positive".into()));
        }
        if self.network_types.is_empty() {
            return Err(Error::InvalidConfig("network_types must not be empty".into()));
        }
        if self.countries == 0 {
            return Err(Error::InvalidConfig("countries must be positive".into()));
        }
        SimConfig::new(self.n, self.model.clone(), self.theta.clone(), self.seed).validate()
    }

    pub fn network_id(&self, k: usize) -> String {
        format!("sim{:0w$}", k + 1, w = self.networks.to_string().len().max(3))
    }

    pub fn country(&self, k: usize) -> String {
        format!("C{}", k % self.countries + 1)
    }
}

/// Draws the batch in memory: one attribute table and network per entry.
pub fn simulate_batch(cfg: &SimulateConfig) -> Result<Vec<(DirectedNetwork, AttributeTable)>> {
    let rosters = simulate_rosters(cfg)?;
    let nets = simulate_networks(cfg, &rosters, 0)?;
    Ok(nets.into_iter().zip(rosters).map(|(n, (_, a))| (n, a)).collect())
}

/// Empty networks with their generated attributes.
pub fn simulate_rosters(cfg: &SimulateConfig) -> Result<Vec<(DirectedNetwork, AttributeTable)>> {
    cfg.validate()?;
    let node_ids: Vec<String> = (0..cfg.n).map(|i| format!("v{:0w$}", i + 1, w = cfg.n.to_string().len().max(2))).collect();
    (0..cfg.networks)
        .map(|k| {
            let attrs = generate_attributes(cfg.n, child_seed(cfg.seed, 2 * k as u64), &cfg.attributes)?;
            let template = DirectedNetwork::new(cfg.network_id(k), cfg.country(k), "1", node_ids.clone())?;
            Ok((template, attrs))
        })
        .collect()
}

/// Draws one network per roster; `stream` separates network types.
pub fn simulate_networks(cfg: &SimulateConfig, rosters: &[(DirectedNetwork, AttributeTable)], stream: u64) -> Result<Vec<DirectedNetwork>> {
    rosters
        .iter()
        .enumerate()
        .map(|(k, (template, attrs))| {
            let net_seed = child_seed(child_seed(cfg.seed, 2 * k as u64 + 1), stream);
            let net = match cfg.sampler() {
                SimulationSampler::Exact => {
                    if let Some(cap) = cfg.outdegree_cap {
                        return Err(Error::UnsupportedConstraint(format!("out-degree cap {cap} requires the Metropolis sampler")));
                    }
                    let bound = BoundModel::<f64>::bind(&cfg.model, attrs)?;
                    ExactSampler::new(&bound, &cfg.theta).with_template(template).draw(&mut stream_rng(net_seed, 0))
                }
                SimulationSampler::Metropolis => {
                    let sim = SimConfig {
                        outdegree_cap: cfg.outdegree_cap,
                        metropolis: MetropolisConfig { sample_count: 1, ..cfg.metropolis.clone() },
                        ..SimConfig::new(cfg.n, cfg.model.clone(), cfg.theta.clone(), net_seed)
                    };
                    let draw = sample_metropolis(&sim, attrs)?.pop().expect("one sample requested");
                    let mut net = template.clone();
                    for (i, j) in draw.ties() {
                        net.add_tie(i, j)?;
                    }
                    net
                }
            };
            Ok(net)
        })
        .collect()
}

/// Edge file name for a network type in a simulated batch.
pub fn edges_file_name(cfg: &SimulateConfig, kind: NetworkType) -> String {
    if cfg.network_types.len() == 1 {
        "edges.csv".into()
    } else {
        format!("edges_{kind}.csv")
    }
}

/// Simulates a batch and writes the edge file(s), `attributes.csv` and a
/// ready-to-run `manifest.json` into the configured output directory.
pub fn simulate(cfg: &SimulateConfig) -> Result<BTreeMap<NetworkType, Vec<DirectedNetwork>>> {
    let rosters = simulate_rosters(cfg)?;
    let dir = &cfg.output_dir;
    let mut edges = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (stream, &kind) in cfg.network_types.iter().enumerate() {
        let nets = simulate_networks(cfg, &rosters, stream as u64)?;
        let name = edges_file_name(cfg, kind);
        write_edges(&dir.join(&name), &nets)?;
        edges.insert(kind, PathBuf::from(name));
        out.insert(kind, nets);
    }
    write_attributes(&dir.join("attributes.csv"), rosters.iter().map(|(n, a)| (n, a)), true)?;
    let manifest = Manifest {
        attributes: "attributes.csv".into(),
        ratings: None,
        edges,
        models: vec![cfg.model.clone()],
        estimator: Default::default(),
        filter: Default::default(),
        pool: Default::default(),
        imputation: Default::default(),
        zero_response: Default::default(),
        seed: cfg.seed,
        output_dir: "results".into(),
        write_draws: false,
    };
    write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(out)
}

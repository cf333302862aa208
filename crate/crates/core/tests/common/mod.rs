#![allow(dead_code)]

use ergmpool::network::{AttributeTable, DirectedNetwork, NodeAttributes};
use ergmpool::rng::{stream_rng, Rng};
use ergmpool::{ModelSpec, Preset};
use rand::Rng as _;

pub const PRESETS: [Preset; 4] = [Preset::Rq1, Preset::Rq2, Preset::H1, Preset::H2];

pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, 0)
}

pub fn random_network(n: usize, density: f64, rng: &mut Rng) -> DirectedNetwork {
    let mut net = DirectedNetwork::with_size(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                net.add_tie(i, j).unwrap();
            }
        }
    }
    net
}

/// Mixed-gender attributes with continuous skills in [0, 1].
pub fn random_attributes(n: usize, rng: &mut Rng) -> AttributeTable {
    let mut rows: Vec<NodeAttributes> = (0..n)
        .map(|_| NodeAttributes {
            female: Some(rng.random::<bool>()),
            skills: Some(rng.random::<f64>()),
            perceived_skills: Some(rng.random::<f64>()),
            ..Default::default()
        })
        .collect();
    rows[0].female = Some(true);
    rows[1].female = Some(false);
    AttributeTable::new(rows)
}

pub fn preset(p: Preset) -> ModelSpec {
    ModelSpec::preset(p)
}

pub fn random_theta(len: usize, scale: f64, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
}

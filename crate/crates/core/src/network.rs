//! Directed classroom networks, node attributes, peer ratings, derived skill
//! scores and descriptive statistics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of items in the composite digital-skills battery.
pub const SKILL_ITEMS: usize = 21;

/// Highest ordinal response of the skills battery and of peer ratings.
const SCALE_MAX: u8 = 5;

/// One wave of one classroom: a fixed node set and a set of ordered ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedNetwork {
    pub network_id: String,
    pub country: String,
    pub wave: String,
    node_ids: Vec<String>,
    adjacency: Vec<bool>,
    edge_count: usize,
}

impl DirectedNetwork {
    /// An empty network over `node_ids`. Ids must be unique.
    pub fn new(
        network_id: impl Into<String>,
        country: impl Into<String>,
        wave: impl Into<String>,
        node_ids: Vec<String>,
    ) -> Result<Self> {
        let network_id = network_id.into();
        let mut seen = HashSet::with_capacity(node_ids.len());
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "network `{network_id}`: duplicate node id `{id}`"
                )));
            }
        }
        let n = node_ids.len();
        Ok(Self {
            network_id,
            country: country.into(),
            wave: wave.into(),
            node_ids,
            adjacency: vec![false; n * n],
            edge_count: 0,
        })
    }

    /// Anonymous network with nodes named `0..n`.
    pub fn with_size(n: usize) -> Self {
        Self::new("net", "", "", (0..n).map(|i| i.to_string()).collect())
            .expect("generated ids are unique")
    }

    pub fn from_ties(n: usize, ties: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::with_size(n);
        for &(i, j) in ties {
            net.add_tie(i, j)?;
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn has_tie(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n() + j]
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::InvalidConfig(format!(
                "tie ({i}, {j}) out of range for a network of {n} nodes"
            )));
        }
        Ok(())
    }

    /// Adds `i → j`. Returns whether the tie was newly inserted.
    pub fn add_tie(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        let n = self.n();
        let slot = &mut self.adjacency[i * n + j];
        if *slot {
            return Ok(false);
        }
        *slot = true;
        self.edge_count += 1;
        Ok(true)
    }

    /// Removes `i → j`. Returns whether a tie was present.
    pub fn remove_tie(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        let n = self.n();
        let slot = &mut self.adjacency[i * n + j];
        if !*slot {
            return Ok(false);
        }
        *slot = false;
        self.edge_count -= 1;
        Ok(true)
    }

    /// Flips `i → j`; returns the new state.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<bool> {
        if self.has_tie_checked(i, j)? {
            self.remove_tie(i, j)?;
            Ok(false)
        } else {
            self.add_tie(i, j)?;
            Ok(true)
        }
    }

    fn has_tie_checked(&self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        Ok(self.has_tie(i, j))
    }

    /// Ties in row-major order.
    pub fn ties(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        self.adjacency
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(move |(k, _)| (k / n, k % n))
    }

    pub fn out_degree(&self, i: usize) -> usize {
        let n = self.n();
        self.adjacency[i * n..(i + 1) * n].iter().filter(|&&t| t).count()
    }

    pub fn max_out_degree(&self) -> usize {
        (0..self.n()).map(|i| self.out_degree(i)).max().unwrap_or(0)
    }

    /// Same nodes with every tie reversed.
    pub fn transpose(&self) -> Self {
        let mut t = self.clone();
        t.adjacency.iter_mut().for_each(|x| *x = false);
        for (i, j) in self.ties() {
            t.adjacency[j * self.n() + i] = true;
        }
        t
    }

    /// Same ties with node `k` renamed to position `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut ids = vec![String::new(); n];
        for (k, &p) in perm.iter().enumerate() {
            ids[p] = self.node_ids[k].clone();
        }
        let mut out = Self::new(&self.network_id, &self.country, &self.wave, ids)
            .expect("permutation preserves uniqueness");
        for (i, j) in self.ties() {
            out.add_tie(perm[i], perm[j]).expect("permuted tie is valid");
        }
        out
    }
}

/// Per-node covariates of one network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeAttributes {
    pub female: Option<bool>,
    pub skill_items: [Option<u8>; SKILL_ITEMS],
    pub skills: Option<f64>,
    pub perceived_skills: Option<f64>,
}

/// Attribute columns addressable by name from model terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Female,
    Skills,
    PerceivedSkills,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Female, Attribute::Skills, Attribute::PerceivedSkills];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Female => "female",
            Attribute::Skills => "skills",
            Attribute::PerceivedSkills => "perceived_skills",
        }
    }

    /// Categorical columns admit exact-match terms.
    pub fn is_categorical(self) -> bool {
        matches!(self, Attribute::Female)
    }
}

impl std::str::FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "female" | "gender" => Ok(Attribute::Female),
            "skills" | "total_skills" => Ok(Attribute::Skills),
            "perceived_skills" | "perceived" => Ok(Attribute::PerceivedSkills),
            _ => Err(Error::UnknownAttribute(s.to_string())),
        }
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One row per node of the owning network, in node-index order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    pub rows: Vec<NodeAttributes>,
}

impl AttributeTable {
    pub fn new(rows: Vec<NodeAttributes>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, node: usize, attr: Attribute) -> Option<f64> {
        let row = &self.rows[node];
        match attr {
            Attribute::Female => row.female.map(|f| if f { 1.0 } else { 0.0 }),
            Attribute::Skills => row.skills,
            Attribute::PerceivedSkills => row.perceived_skills,
        }
    }

    pub fn set_value(&mut self, node: usize, attr: Attribute, value: Option<f64>) {
        let row = &mut self.rows[node];
        match attr {
            Attribute::Female => row.female = value.map(|v| v >= 0.5),
            Attribute::Skills => row.skills = value,
            Attribute::PerceivedSkills => row.perceived_skills = value,
        }
    }

    pub fn column(&self, attr: Attribute) -> Vec<Option<f64>> {
        (0..self.len()).map(|i| self.value(i, attr)).collect()
    }

    /// Fully observed column, or the first node with a missing value.
    pub fn complete_column(&self, attr: Attribute) -> Result<Vec<f64>> {
        self.column(attr)
            .into_iter()
            .enumerate()
            .map(|(node, v)| {
                v.ok_or_else(|| Error::MissingCovariate { attr: attr.name().to_string(), node })
            })
            .collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows = vec![NodeAttributes::default(); self.len()];
        for (k, &p) in perm.iter().enumerate() {
            rows[p] = self.rows[k].clone();
        }
        Self { rows }
    }
}

/// Peer rating `rater → target` on the 1..=5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rating {
    pub rater: usize,
    pub target: usize,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RatingEdgeList {
    ratings: Vec<Rating>,
}

impl RatingEdgeList {
    pub fn new(ratings: Vec<Rating>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ratings.len());
        for r in &ratings {
            if r.rater == r.target {
                return Err(Error::SelfLoop(r.rater));
            }
            if !(1..=SCALE_MAX).contains(&r.score) {
                return Err(Error::InvalidConfig(format!(
                    "rating score {} outside 1..=5",
                    r.score
                )));
            }
            if !seen.insert((r.rater, r.target)) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate rating {} → {}",
                    r.rater, r.target
                )));
            }
        }
        Ok(Self { ratings })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rating> {
        self.ratings.iter()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            ratings: self
                .ratings
                .iter()
                .map(|r| Rating { rater: perm[r.rater], target: perm[r.target], score: r.score })
                .collect(),
        }
    }
}

/// Maps a 1..=5 instrument mean onto [0, 1] using the instrument anchors.
pub fn rescale_unit(mean: f64) -> f64 {
    (mean - 1.0) / f64::from(SCALE_MAX - 1)
}

/// Mean incoming peer rating per node on the raw 1..=5 scale.
pub fn mean_incoming_ratings(n: usize, ratings: &RatingEdgeList) -> Vec<Option<f64>> {
    let mut sum = vec![0u32; n];
    let mut count = vec![0u32; n];
    for r in ratings.iter() {
        sum[r.target] += u32::from(r.score);
        count[r.target] += 1;
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| f64::from(s) / f64::from(c)))
        .collect()
}

/// Perceived skill of each node: mean incoming rating rescaled to [0, 1];
/// missing for nodes nobody rated.
pub fn derive_perceived_skills(network: &DirectedNetwork, ratings: &RatingEdgeList) -> Vec<Option<f64>> {
    mean_incoming_ratings(network.n(), ratings)
        .into_iter()
        .map(|m| m.map(rescale_unit))
        .collect()
}

/// How the "I don't understand" response (0) enters the composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroResponse {
    /// Recode to the lowest skill level (1).
    #[default]
    Lowest,
    Missing,
}

/// Composite skill score in [0, 1]: mean of the recoded items, rescaled.
/// Missing when more than half the items are missing.
pub fn derive_composite_skills(items: &[Option<u8>], zero: ZeroResponse) -> Option<f64> {
    let recoded: Vec<u8> = items
        .iter()
        .filter_map(|&x| match x {
            Some(0) => match zero {
                ZeroResponse::Lowest => Some(1),
                ZeroResponse::Missing => None,
            },
            other => other,
        })
        .collect();
    let missing = items.len() - recoded.len();
    if recoded.is_empty() || 2 * missing > items.len() {
        return None;
    }
    let mean = recoded.iter().map(|&x| f64::from(x)).sum::<f64>() / recoded.len() as f64;
    Some(rescale_unit(mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub edge_count: usize,
    pub density: f64,
    pub reciprocated_dyad_count: usize,
    pub mean_outdegree: f64,
}

pub fn describe(network: &DirectedNetwork) -> Result<NetworkSummary> {
    let n = network.n();
    if n < 2 {
        return Err(Error::DegenerateNetwork(n));
    }
    let edge_count = network.edge_count();
    let reciprocated_dyad_count = network.ties().filter(|&(i, j)| i < j && network.has_tie(j, i)).count();
    Ok(NetworkSummary {
        edge_count,
        density: edge_count as f64 / (n * (n - 1)) as f64,
        reciprocated_dyad_count,
        mean_outdegree: edge_count as f64 / n as f64,
    })
}

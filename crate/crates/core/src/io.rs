//! CSV ingestion and emission for edges, attributes and peer ratings.
//!
//! Schemas:
//! - edges: `network_id,source,target`
//! - attributes: `network_id,node_id,country,wave,female,item_01,...,item_21`,
//!   optionally followed by the derived columns `skills,perceived_skills`
//! - ratings: `network_id,rater,target,score`
//!
//! Empty cells are missing values. Networks are returned sorted by id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{
    AttributeTable, DirectedNetwork, NodeAttributes, Rating, RatingEdgeList, SKILL_ITEMS,
};

/// Node roster and attributes of one network as read from the attributes file.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAttributes {
    pub network_id: String,
    pub country: String,
    pub wave: String,
    pub node_ids: Vec<String>,
    pub table: AttributeTable,
}

impl NetworkAttributes {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    pub fn empty_network(&self) -> DirectedNetwork {
        DirectedNetwork::new(&self.network_id, &self.country, &self.wave, self.node_ids.clone())
            .expect("roster ids validated at load")
    }
}

/// One network with everything attached to it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    pub network: DirectedNetwork,
    pub attributes: AttributeTable,
    pub ratings: RatingEdgeList,
}

pub fn item_header(k: usize) -> String {
    format!("item_{:02}", k + 1)
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

struct Columns {
    file: String,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(file: &str, headers: &csv::StringRecord) -> Self {
        Self {
            file: file.to_string(),
            index: headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect(),
        }
    }

    fn require(&self, names: &[&str]) -> Result<()> {
        for name in names {
            if !self.index.contains_key(*name) {
                return Err(Error::Parse {
                    file: self.file.clone(),
                    line: 1,
                    msg: format!("missing required column `{name}`"),
                });
            }
        }
        Ok(())
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&i| rec.get(i))
    }

    fn req<'r>(&self, rec: &'r csv::StringRecord, name: &str, line: u64) -> Result<&'r str> {
        match self.get(rec, name) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::Parse {
                file: self.file.clone(),
                line,
                msg: format!("empty or absent `{name}`"),
            }),
        }
    }

    fn parse_opt<T: std::str::FromStr>(
        &self,
        rec: &csv::StringRecord,
        name: &str,
        line: u64,
    ) -> Result<Option<T>> {
        match self.get(rec, name) {
            None | Some("") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Parse {
                file: self.file.clone(),
                line,
                msg: format!("cannot parse `{v}` in column `{name}`"),
            }),
        }
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn read_attributes(path: &Path) -> Result<Vec<NetworkAttributes>> {
    let file = file_label(path);
    let mut reader = open_reader(path)?;
    let cols = Columns::new(&file, reader.headers()?);
    let mut required = vec!["network_id", "node_id", "country", "wave", "female"];
    let items: Vec<String> = (0..SKILL_ITEMS).map(item_header).collect();
    required.extend(items.iter().map(String::as_str));
    cols.require(&required)?;

    let mut by_network: BTreeMap<String, NetworkAttributes> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let network_id = cols.req(&rec, "network_id", line)?.to_string();
        let node_id = cols.req(&rec, "node_id", line)?.to_string();
        let country = cols.get(&rec, "country").unwrap_or("").to_string();
        let wave = cols.get(&rec, "wave").unwrap_or("").to_string();
        if !seen.insert((network_id.clone(), node_id.clone())) {
            return Err(Error::Validation {
                file,
                line,
                msg: format!("duplicate node `{node_id}` in network `{network_id}`"),
            });
        }
        let female = match cols.parse_opt::<u8>(&rec, "female", line)? {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(v) => {
                return Err(Error::Validation { file, line, msg: format!("female must be 0, 1 or empty, got {v}") })
            }
        };
        let mut skill_items = [None; SKILL_ITEMS];
        for (k, name) in items.iter().enumerate() {
            let v = cols.parse_opt::<u8>(&rec, name, line)?;
            if let Some(x) = v {
                if x > 5 {
                    return Err(Error::Validation { file, line, msg: format!("{name} must be in 0..=5, got {x}") });
                }
            }
            skill_items[k] = v;
        }
        let unit = |name: &str| -> Result<Option<f64>> {
            let v = cols.parse_opt::<f64>(&rec, name, line)?;
            match v {
                Some(x) if !(0.0..=1.0).contains(&x) => Err(Error::Validation {
                    file: file.clone(),
                    line,
                    msg: format!("{name} must lie in [0, 1], got {x}"),
                }),
                other => Ok(other),
            }
        };
        let skills = unit("skills")?;
        let perceived_skills = unit("perceived_skills")?;

        let entry = by_network.entry(network_id.clone()).or_insert_with(|| NetworkAttributes {
            network_id: network_id.clone(),
            country: country.clone(),
            wave: wave.clone(),
            node_ids: Vec::new(),
            table: AttributeTable::default(),
        });
        if entry.country != country || entry.wave != wave {
            return Err(Error::Validation {
                file,
                line,
                msg: format!("network `{network_id}` has inconsistent country/wave labels"),
            });
        }
        entry.node_ids.push(node_id);
        entry.table.rows.push(NodeAttributes { female, skill_items, skills, perceived_skills });
    }
    Ok(by_network.into_values().collect())
}

fn roster_lookup(rosters: &[NetworkAttributes]) -> HashMap<&str, (usize, HashMap<&str, usize>)> {
    rosters
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let ids = r.node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            (r.network_id.as_str(), (k, ids))
        })
        .collect()
}

/// Reads ties for every roster; rosters without ties yield empty networks.
pub fn read_edges(path: &Path, rosters: &[NetworkAttributes]) -> Result<Vec<DirectedNetwork>> {
    let file = file_label(path);
    let mut reader = open_reader(path)?;
    let cols = Columns::new(&file, reader.headers()?);
    cols.require(&["network_id", "source", "target"])?;
    let lookup = roster_lookup(rosters);
    let mut networks: Vec<DirectedNetwork> = rosters.iter().map(NetworkAttributes::empty_network).collect();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let network_id = cols.req(&rec, "network_id", line)?;
        let source = cols.req(&rec, "source", line)?;
        let target = cols.req(&rec, "target", line)?;
        let (k, ids) = lookup.get(network_id).ok_or_else(|| Error::Validation {
            file: file.clone(),
            line,
            msg: format!("network `{network_id}` has no rows in the attributes file"),
        })?;
        let node = |id: &str| {
            ids.get(id).copied().ok_or_else(|| Error::Validation {
                file: file.clone(),
                line,
                msg: format!("unknown node `{id}` in network `{network_id}`"),
            })
        };
        let (i, j) = (node(source)?, node(target)?);
        if i == j {
            return Err(Error::Validation {
                file,
                line,
                msg: format!("self-loop on `{source}` in network `{network_id}`"),
            });
        }
        if !networks[*k].add_tie(i, j)? {
            return Err(Error::Validation {
                file,
                line,
                msg: format!("duplicate tie {source} → {target} in network `{network_id}`"),
            });
        }
    }
    Ok(networks)
}

pub fn read_ratings(path: &Path, rosters: &[NetworkAttributes]) -> Result<Vec<RatingEdgeList>> {
    let file = file_label(path);
    let mut reader = open_reader(path)?;
    let cols = Columns::new(&file, reader.headers()?);
    cols.require(&["network_id", "rater", "target", "score"])?;
    let lookup = roster_lookup(rosters);
    let mut lists: Vec<Vec<Rating>> = vec![Vec::new(); rosters.len()];
    let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let network_id = cols.req(&rec, "network_id", line)?;
        let (k, ids) = lookup.get(network_id).ok_or_else(|| Error::Validation {
            file: file.clone(),
            line,
            msg: format!("network `{network_id}` has no rows in the attributes file"),
        })?;
        let node = |name: &str| -> Result<usize> {
            let id = cols.req(&rec, name, line)?;
            ids.get(id).copied().ok_or_else(|| Error::Validation {
                file: file.clone(),
                line,
                msg: format!("unknown node `{id}` in network `{network_id}`"),
            })
        };
        let (rater, target) = (node("rater")?, node("target")?);
        let score: u8 = cols.parse_opt(&rec, "score", line)?.ok_or_else(|| Error::Parse {
            file: file.clone(),
            line,
            msg: "empty score".into(),
        })?;
        let invalid = |msg: String| Error::Validation { file: file.clone(), line, msg };
        if rater == target {
            return Err(invalid("a node cannot rate itself".into()));
        }
        if !(1..=5).contains(&score) {
            return Err(invalid(format!("score must be in 1..=5, got {score}")));
        }
        if !seen.insert((*k, rater, target)) {
            return Err(invalid("duplicate rating for the same ordered pair".into()));
        }
        lists[*k].push(Rating { rater, target, score });
    }
    lists.into_iter().map(RatingEdgeList::new).collect()
}

/// Reads a batch of networks. One entry per network id in the attributes
/// file, sorted by id.
pub fn load_batch(edges: &Path, attributes: &Path, ratings: Option<&Path>) -> Result<Vec<NetworkData>> {
    let rosters = read_attributes(attributes)?;
    let networks = read_edges(edges, &rosters)?;
    let ratings = match ratings {
        Some(p) => read_ratings(p, &rosters)?,
        None => vec![RatingEdgeList::default(); rosters.len()],
    };
    Ok(rosters
        .into_iter()
        .zip(networks)
        .zip(ratings)
        .map(|((r, network), ratings)| NetworkData { network, attributes: r.table, ratings })
        .collect())
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_edges<'a>(path: &Path, networks: impl IntoIterator<Item = &'a DirectedNetwork>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["network_id", "source", "target"])?;
    for net in networks {
        for (i, j) in net.ties() {
            w.write_record([net.network_id.as_str(), &net.node_ids()[i], &net.node_ids()[j]])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the attributes schema; `derived` appends `skills,perceived_skills`.
pub fn write_attributes<'a>(
    path: &Path,
    networks: impl IntoIterator<Item = (&'a DirectedNetwork, &'a AttributeTable)>,
    derived: bool,
) -> Result<()> {
    let mut w = create(path)?;
    let mut header: Vec<String> = ["network_id", "node_id", "country", "wave", "female"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..SKILL_ITEMS).map(item_header));
    if derived {
        header.push("skills".into());
        header.push("perceived_skills".into());
    }
    w.write_record(&header)?;
    for (net, table) in networks {
        for (i, row) in table.rows.iter().enumerate() {
            let mut rec = vec![
                net.network_id.clone(),
                net.node_ids()[i].clone(),
                net.country.clone(),
                net.wave.clone(),
                opt(row.female.map(u8::from)),
            ];
            rec.extend(row.skill_items.iter().map(|&x| opt(x)));
            if derived {
                rec.push(opt(row.skills));
                rec.push(opt(row.perceived_skills));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_ratings<'a>(
    path: &Path,
    networks: impl IntoIterator<Item = (&'a DirectedNetwork, &'a RatingEdgeList)>,
) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["network_id", "rater", "target", "score"])?;
    for (net, ratings) in networks {
        for r in ratings.iter() {
            w.write_record([
                net.network_id.as_str(),
                &net.node_ids()[r.rater],
                &net.node_ids()[r.target],
                &r.score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `edges.csv`, `attributes.csv` and `ratings.csv` into `dir`.
pub fn write_batch(dir: &Path, batch: &[NetworkData]) -> Result<()> {
    let derived = batch
        .iter()
        .any(|d| d.attributes.rows.iter().any(|r| r.skills.is_some() || r.perceived_skills.is_some()));
    write_edges(&dir.join("edges.csv"), batch.iter().map(|d| &d.network))?;
    write_attributes(&dir.join("attributes.csv"), batch.iter().map(|d| (&d.network, &d.attributes)), derived)?;
    write_ratings(&dir.join("ratings.csv"), batch.iter().map(|d| (&d.network, &d.ratings)))?;
    Ok(())
}

/// Writes any text artifact, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

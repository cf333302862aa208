use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Estimator, FilterOptions};
use crate::network::{Attribute, ZeroResponse};
use crate::pool::PoolConfig;
use crate::terms::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkType {
    #[default]
    Seeking,
    Giving,
}

impl NetworkType {
    pub const ALL: [NetworkType; 2] = [NetworkType::Seeking, NetworkType::Giving];

    pub fn name(self) -> &'static str {
        match self {
            NetworkType::Seeking => "seeking",
            NetworkType::Giving => "giving",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            NetworkType::Seeking => "Seeking",
            NetworkType::Giving => "Giving",
        }
    }
}

impl fmt::Display for NetworkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NetworkType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "seeking" => Ok(NetworkType::Seeking),
            "giving" => Ok(NetworkType::Giving),
            _ => Err(Error::InvalidConfig(format!("unknown network type `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationConfig {
    /// Chained-equation sweeps.
    pub iterations: usize,
    /// Completed datasets to emit; the analysis uses the first.
    pub imputations: usize,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self { iterations: crate::impute::DEFAULT_IMPUTATION_ITERATIONS, imputations: 1 }
    }
}

/// A complete run description. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub attributes: PathBuf,
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    pub edges: BTreeMap<NetworkType, PathBuf>,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub filter: FilterOptions,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub imputation: ImputationConfig,
    #[serde(default)]
    pub zero_response: ZeroResponse,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub write_draws: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads the manifest and resolves every path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.resolve(base);
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.attributes);
        if let Some(r) = self.ratings.as_mut() {
            fix(r);
        }
        for p in self.edges.values_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no models".into()));
        }
        if self.edges.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no edge files".into()));
        }
        if self.imputation.imputations == 0 {
            return Err(Error::InvalidConfig("imputations must be at least 1".into()));
        }
        for m in &self.models {
            m.check_categorical_matches()?;
        }
        let files = std::iter::once(&self.attributes).chain(self.ratings.iter()).chain(self.edges.values());
        for f in files {
            if !f.is_file() {
                return Err(Error::Validation {
                    file: f.display().to_string(),
                    line: 0,
                    msg: "input file does not exist".into(),
                });
            }
        }
        self.pool.validate()
    }

    /// Attributes referenced by any model term, in canonical order.
    pub fn used_attributes(&self) -> Vec<Attribute> {
        Attribute::ALL
            .into_iter()
            .filter(|a| self.models.iter().any(|m| m.terms().iter().any(|t| t.attribute() == Some(*a))))
            .collect()
    }
}

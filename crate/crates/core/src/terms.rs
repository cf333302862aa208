//! The six dyad-independent ERGM statistics: sufficient statistics, toggle
//! change statistics, and per-dyad design vectors for the factorized
//! likelihood.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Attribute, AttributeTable, DirectedNetwork};
use crate::num::{Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TermConfig", into = "TermConfig")]
pub enum TermKind {
    Edges,
    Mutual,
    /// Sender covariate: Σ over ties of the source's value.
    NodeOCov(Attribute),
    /// Receiver covariate: Σ over ties of the target's value.
    NodeICov(Attribute),
    AbsDiff(Attribute),
    NodeMatch(Attribute),
}

impl TermKind {
    pub fn attribute(self) -> Option<Attribute> {
        match self {
            TermKind::Edges | TermKind::Mutual => None,
            TermKind::NodeOCov(a) | TermKind::NodeICov(a) | TermKind::AbsDiff(a) | TermKind::NodeMatch(a) => Some(a),
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            TermKind::Edges => "edges",
            TermKind::Mutual => "mutual",
            TermKind::NodeOCov(_) => "nodeocov",
            TermKind::NodeICov(_) => "nodeicov",
            TermKind::AbsDiff(_) => "absdiff",
            TermKind::NodeMatch(_) => "nodematch",
        }
    }

    /// Machine name, e.g. `nodeocov.skills`.
    pub fn name(self) -> String {
        match self.attribute() {
            Some(a) => format!("{}.{}", self.keyword(), a),
            None => self.keyword().to_string(),
        }
    }

    /// Human label used in report tables.
    pub fn label(self) -> String {
        use Attribute::*;
        match self {
            TermKind::Edges => "Density".into(),
            TermKind::Mutual => "Reciprocity".into(),
            TermKind::NodeOCov(Skills) => "Sender effect of total skills".into(),
            TermKind::NodeICov(Skills) => "Receiver effect of total skills".into(),
            TermKind::NodeOCov(PerceivedSkills) => "Sender effect of perceived skills".into(),
            TermKind::NodeICov(PerceivedSkills) => "Receiver effect of perceived skills".into(),
            TermKind::NodeOCov(Female) => "Sender effect of being female".into(),
            TermKind::NodeICov(Female) => "Receiver effect of being female".into(),
            TermKind::AbsDiff(Skills) => "Similarity in total skills (homophily)".into(),
            TermKind::NodeMatch(Female) => "Same-gender preference (homophily)".into(),
            TermKind::AbsDiff(PerceivedSkills) => "Similarity in perceived skills (homophily)".into(),
            TermKind::AbsDiff(Female) => "Gender difference".into(),
            TermKind::NodeMatch(a) => format!("Match on {a}"),
        }
    }

    /// The same statistic with sender and receiver roles exchanged.
    pub fn transposed(self) -> Self {
        match self {
            TermKind::NodeOCov(a) => TermKind::NodeICov(a),
            TermKind::NodeICov(a) => TermKind::NodeOCov(a),
            other => other,
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Serialized form `{"kind": "nodeocov", "attr": "skills"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
}

impl TryFrom<TermConfig> for TermKind {
    type Error = Error;

    fn try_from(cfg: TermConfig) -> Result<Self> {
        let kind = cfg.kind.trim().to_ascii_lowercase();
        let attr = || -> Result<Attribute> {
            cfg.attr
                .as_deref()
                .ok_or_else(|| Error::InvalidModel(format!("term `{kind}` needs an `attr`")))?
                .parse()
        };
        let no_attr = |t: TermKind| -> Result<TermKind> {
            match &cfg.attr {
                Some(a) => Err(Error::InvalidModel(format!("term `{kind}` takes no attribute, got `{a}`"))),
                None => Ok(t),
            }
        };
        match kind.as_str() {
            "edges" => no_attr(TermKind::Edges),
            "mutual" => no_attr(TermKind::Mutual),
            "nodeocov" => Ok(TermKind::NodeOCov(attr()?)),
            "nodeicov" => Ok(TermKind::NodeICov(attr()?)),
            "absdiff" => Ok(TermKind::AbsDiff(attr()?)),
            "nodematch" => Ok(TermKind::NodeMatch(attr()?)),
            _ => Err(Error::UnsupportedTerm(cfg.kind.clone())),
        }
    }
}

impl From<TermKind> for TermConfig {
    fn from(t: TermKind) -> Self {
        TermConfig { kind: t.keyword().to_string(), attr: t.attribute().map(|a| a.name().to_string()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Rq1,
    Rq2,
    H1,
    H2,
    #[default]
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Rq1 => "rq1",
            Preset::Rq2 => "rq2",
            Preset::H1 => "h1",
            Preset::H2 => "h2",
            Preset::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rq1" => Ok(Preset::Rq1),
            "rq2" => Ok(Preset::Rq2),
            "h1" => Ok(Preset::H1),
            "h2" => Ok(Preset::H2),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::InvalidModel(format!("unknown preset `{s}`"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered term list. The order fixes the coefficient order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ModelSpec {
    preset: Preset,
    terms: Vec<TermKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermKind>>,
}

impl TryFrom<ModelConfig> for ModelSpec {
    type Error = Error;
    fn try_from(cfg: ModelConfig) -> Result<Self> {
        match (cfg.model, cfg.terms) {
            (Preset::Custom, Some(terms)) => ModelSpec::custom(terms),
            (Preset::Custom, None) => Err(Error::InvalidModel("custom model needs `terms`".into())),
            (p, None) => Ok(ModelSpec::preset(p)),
            (p, Some(_)) => Err(Error::InvalidModel(format!("preset `{p}` does not take `terms`"))),
        }
    }
}

impl From<ModelSpec> for ModelConfig {
    fn from(m: ModelSpec) -> Self {
        let terms = (m.preset == Preset::Custom).then_some(m.terms);
        ModelConfig { model: m.preset, terms }
    }
}

impl ModelSpec {
    pub fn preset(preset: Preset) -> Self {
        use Attribute::*;
        use TermKind::*;
        let rq1 = vec![
            Edges,
            Mutual,
            NodeOCov(Skills),
            NodeICov(Skills),
            NodeOCov(PerceivedSkills),
            NodeICov(PerceivedSkills),
            AbsDiff(Skills),
        ];
        let terms = match preset {
            Preset::Rq1 => rq1,
            Preset::Rq2 => {
                let mut t = rq1;
                t.push(NodeOCov(Female));
                t
            }
            Preset::H1 => vec![Edges, Mutual, NodeICov(Female)],
            Preset::H2 => vec![Edges, Mutual, NodeMatch(Female)],
            Preset::Custom => vec![Edges],
        };
        Self { preset, terms }
    }

    pub fn custom(terms: Vec<TermKind>) -> Result<Self> {
        let edges = terms.iter().filter(|t| **t == TermKind::Edges).count();
        if edges != 1 {
            return Err(Error::InvalidModel(format!("model must contain `edges` exactly once, found {edges}")));
        }
        for (k, t) in terms.iter().enumerate() {
            if terms[..k].contains(t) {
                return Err(Error::InvalidModel(format!("duplicate term `{t}`")));
            }
        }
        Ok(Self { preset: Preset::Custom, terms })
    }

    pub fn preset_kind(&self) -> Preset {
        self.preset
    }

    pub fn terms(&self) -> &[TermKind] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name()).collect()
    }

    pub fn mutual_index(&self) -> Option<usize> {
        self.terms.iter().position(|t| *t == TermKind::Mutual)
    }

    pub fn has_mutual(&self) -> bool {
        self.mutual_index().is_some()
    }

    /// Exact-match terms on continuous columns are rejected at the CLI.
    pub fn check_categorical_matches(&self) -> Result<()> {
        for t in &self.terms {
            if let TermKind::NodeMatch(a) = t {
                if !a.is_categorical() {
                    return Err(Error::InvalidModel(format!("nodematch requires a categorical attribute, `{a}` is continuous")));
                }
            }
        }
        Ok(())
    }

    /// Model over the transposed network: sender and receiver terms swapped.
    pub fn transposed(&self) -> Self {
        Self { preset: Preset::Custom, terms: self.terms.iter().map(|t| t.transposed()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BoundTerm<S> {
    Edges,
    Mutual,
    Sender(Vec<S>),
    Receiver(Vec<S>),
    AbsDiff(Vec<S>),
    Match(Vec<S>),
}

/// A model whose covariate terms have been resolved against one network's
/// attribute table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundModel<S> {
    terms: Vec<BoundTerm<S>>,
    n: usize,
    mutual: Option<usize>,
}

/// The covariate part of each directed tie of the dyad {i, j}, with the
/// reciprocity term isolated. The four dyad states carry statistic vectors
/// 0, `forward`, `backward` and `forward + backward + e_mutual`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadTerms<S> {
    pub forward: Vec<S>,
    pub backward: Vec<S>,
    pub mutual: Option<usize>,
}

/// Dyad states in canonical order: null, i→j only, j→i only, mutual.
pub const DYAD_STATES: usize = 4;

impl<S: Scalar> DyadTerms<S> {
    /// Statistic vector contributed by one of the four dyad states.
    pub fn state_stats(&self, state: usize) -> Vec<S> {
        let p = self.forward.len();
        match state {
            0 => vec![S::zero(); p],
            1 => self.forward.clone(),
            2 => self.backward.clone(),
            3 => {
                let mut v: Vec<S> =
                    self.forward.iter().zip(&self.backward).map(|(a, b)| a.clone() + b.clone()).collect();
                if let Some(m) = self.mutual {
                    v[m] = v[m].clone() + S::one();
                }
                v
            }
            _ => panic!("dyad state {state} out of range"),
        }
    }
}

impl<T: Real> DyadTerms<T> {
    /// Linear predictors `(η_ij, η_ji, θ_mutual)` at `theta`.
    pub fn predictors(&self, theta: &[T]) -> (T, T, T) {
        let dot = |x: &[T]| x.iter().zip(theta).map(|(&a, &b)| a * b).sum::<T>();
        let m = self.mutual.map_or(T::zero(), |k| theta[k]);
        (dot(&self.forward), dot(&self.backward), m)
    }

    /// Unnormalized log-weights of the four states.
    pub fn log_weights(&self, theta: &[T]) -> [T; DYAD_STATES] {
        let (a, b, m) = self.predictors(theta);
        [T::zero(), a, b, a + b + m]
    }
}

/// Which of the four states the dyad {i, j} (i < j) is in.
pub fn dyad_state(net: &DirectedNetwork, i: usize, j: usize) -> usize {
    usize::from(net.has_tie(i, j)) + 2 * usize::from(net.has_tie(j, i))
}

impl<S: Scalar> BoundModel<S> {
    pub fn bind(model: &ModelSpec, attrs: &AttributeTable) -> Result<Self> {
        let column = |a: Attribute| -> Result<Vec<S>> {
            attrs
                .complete_column(a)?
                .into_iter()
                .map(|x| {
                    S::from_f64(x).ok_or_else(|| Error::InvalidModel(format!("cannot represent {x} as a scalar")))
                })
                .collect()
        };
        let terms = model
            .terms()
            .iter()
            .map(|t| {
                Ok(match *t {
                    TermKind::Edges => BoundTerm::Edges,
                    TermKind::Mutual => BoundTerm::Mutual,
                    TermKind::NodeOCov(a) => BoundTerm::Sender(column(a)?),
                    TermKind::NodeICov(a) => BoundTerm::Receiver(column(a)?),
                    TermKind::AbsDiff(a) => BoundTerm::AbsDiff(column(a)?),
                    TermKind::NodeMatch(a) => BoundTerm::Match(column(a)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms, n: attrs.len(), mutual: model.mutual_index() })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn mutual_index(&self) -> Option<usize> {
        self.mutual
    }

    fn check_network(&self, net: &DirectedNetwork) {
        assert_eq!(net.n(), self.n, "model bound to {} nodes, network has {}", self.n, net.n());
    }

    /// Contribution of the directed tie i→j to every non-reciprocity term.
    fn tie_stats(&self, i: usize, j: usize) -> Vec<S> {
        self.terms
            .iter()
            .map(|t| match t {
                BoundTerm::Edges => S::one(),
                BoundTerm::Mutual => S::zero(),
                BoundTerm::Sender(x) => x[i].clone(),
                BoundTerm::Receiver(x) => x[j].clone(),
                BoundTerm::AbsDiff(x) => x[i].abs_diff(&x[j]),
                BoundTerm::Match(x) => S::indicator(x[i] == x[j]),
            })
            .collect()
    }

    /// g(y): per-term sums over ties; reciprocity counts unordered mutual dyads.
    pub fn sufficient_stats(&self, net: &DirectedNetwork) -> Vec<S> {
        self.check_network(net);
        let mut g = vec![S::zero(); self.len()];
        for (i, j) in net.ties() {
            for (acc, v) in g.iter_mut().zip(self.tie_stats(i, j)) {
                *acc = acc.clone() + v;
            }
            if let Some(m) = self.mutual {
                if i < j && net.has_tie(j, i) {
                    g[m] = g[m].clone() + S::one();
                }
            }
        }
        g
    }

    /// g(y ∪ {i→j}) − g(y \ {i→j}).
    pub fn change_stats(&self, net: &DirectedNetwork, i: usize, j: usize) -> Result<Vec<S>> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        self.check_network(net);
        let mut delta = self.tie_stats(i, j);
        if let Some(m) = self.mutual {
            delta[m] = S::indicator(net.has_tie(j, i));
        }
        Ok(delta)
    }

    pub fn dyad_terms(&self, i: usize, j: usize) -> Result<DyadTerms<S>> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(DyadTerms { forward: self.tie_stats(i, j), backward: self.tie_stats(j, i), mutual: self.mutual })
    }

    /// Design vectors of every unordered dyad, in (i < j) row-major order.
    pub fn all_dyads(&self) -> Vec<(usize, usize, DyadTerms<S>)> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push((i, j, self.dyad_terms(i, j).expect("i < j")));
            }
        }
        out
    }
}

pub fn sufficient_stats<S: Scalar>(net: &DirectedNetwork, attrs: &AttributeTable, model: &ModelSpec) -> Result<Vec<S>> {
    Ok(BoundModel::bind(model, attrs)?.sufficient_stats(net))
}

pub fn change_stats<S: Scalar>(
    net: &DirectedNetwork,
    attrs: &AttributeTable,
    model: &ModelSpec,
    i: usize,
    j: usize,
) -> Result<Vec<S>> {
    BoundModel::bind(model, attrs)?.change_stats(net, i, j)
}

pub fn dyad_predictors<S: Scalar>(attrs: &AttributeTable, model: &ModelSpec, i: usize, j: usize) -> Result<DyadTerms<S>> {
    BoundModel::bind(model, attrs)?.dyad_terms(i, j)
}

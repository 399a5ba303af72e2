//! Topology and scenario files (TOML).
//!
//! A topology file holds `n`, `leaders`, and either top-level `edges` for a
//! static graph or named `[graphs.<name>]` tables with a `schedule` of graph
//! names and `intervals` lengths summing to the schedule length. An edge is
//! `[j, i]` (i hears from j) or `{ pair = [j, i], undirected = true }`.
//!
//! A scenario file names an algorithm, a topology (a path relative to the
//! scenario, or a corpus name), parameters, a staircase reference, initial
//! states, offsets, and adversary scripts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AttackScript;
use crate::agents::ReferenceFunction;
use crate::corpus;
use crate::engine::{Algorithm, EngineOptions, MessageLog, Scenario};
use crate::error::{Error, Result};
use crate::graph::{DiGraph, NodeId, NodeSet, TopologySchedule};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Pair([NodeId; 2]),
    Tagged {
        pair: [NodeId; 2],
        #[serde(default)]
        undirected: bool,
    },
}

impl EdgeSpec {
    fn directed(&self) -> Vec<(NodeId, NodeId)> {
        match *self {
            EdgeSpec::Pair([j, i]) | EdgeSpec::Tagged { pair: [j, i], undirected: false } => vec![(j, i)],
            EdgeSpec::Tagged { pair: [j, i], undirected: true } => vec![(j, i), (i, j)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub n: usize,
    pub leaders: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub graphs: BTreeMap<String, GraphSpec>,
}

/// A parsed topology: the schedule and its leader set.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub schedule: TopologySchedule,
    pub leaders: NodeSet,
    pub description: Option<String>,
}

fn graph_from(n: usize, edges: &[EdgeSpec]) -> Result<DiGraph> {
    DiGraph::from_edges(n, edges.iter().flat_map(EdgeSpec::directed))
}

impl TopologyFile {
    pub fn build(&self) -> Result<Topology> {
        let n = self.n;
        if n == 0 {
            return Err(Error::config("n must be positive"));
        }
        let mut leaders = NodeSet::EMPTY;
        for &d in &self.leaders {
            if d == 0 || d > n {
                return Err(Error::InvalidNode { node: d, n });
            }
            leaders.insert(d);
        }
        let schedule = if self.schedule.is_empty() {
            if !self.graphs.is_empty() {
                return Err(Error::config("named graphs require a schedule"));
            }
            let intervals = if self.intervals.is_empty() { vec![1] } else { self.intervals.clone() };
            let g = graph_from(n, &self.edges)?;
            TopologySchedule::with_labels(vec![g; intervals.iter().sum()], vec!["static".into(); intervals.iter().sum()], intervals)?
        } else {
            if !self.edges.is_empty() {
                return Err(Error::config("use either top-level edges or a schedule of named graphs, not both"));
            }
            let mut graphs = Vec::with_capacity(self.schedule.len());
            for name in &self.schedule {
                let spec = self
                    .graphs
                    .get(name)
                    .ok_or_else(|| Error::config(format!("schedule names unknown graph {name:?}")))?;
                graphs.push(graph_from(n, &spec.edges)?);
            }
            let intervals = if self.intervals.is_empty() { vec![self.schedule.len()] } else { self.intervals.clone() };
            TopologySchedule::with_labels(graphs, self.schedule.clone(), intervals)?
        };
        Ok(Topology { schedule, leaders, description: self.description.clone() })
    }

    /// Canonical file for a schedule: plain sorted pairs, one named graph per
    /// distinct label.
    pub fn canonical(topology: &Topology) -> Self {
        let s = &topology.schedule;
        let pairs = |g: &DiGraph| g.edges().map(|(j, i)| EdgeSpec::Pair([j, i])).collect::<Vec<_>>();
        let is_static = s.graphs().iter().all(|g| *g == s.graphs()[0]) && s.labels().iter().all(|l| l == "static");
        let mut file = TopologyFile {
            description: topology.description.clone(),
            n: s.node_count(),
            leaders: topology.leaders.to_vec(),
            edges: Vec::new(),
            schedule: Vec::new(),
            intervals: Vec::new(),
            graphs: BTreeMap::new(),
        };
        if is_static {
            file.edges = pairs(&s.graphs()[0]);
            if s.interval_lengths() != [1] {
                file.intervals = s.interval_lengths().to_vec();
            }
        } else {
            for (label, g) in s.labels().iter().zip(s.graphs()) {
                file.graphs.entry(label.clone()).or_insert_with(|| GraphSpec { edges: pairs(g) });
            }
            file.schedule = s.labels().to_vec();
            file.intervals = s.interval_lengths().to_vec();
        }
        file
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }
}

fn parse_error(origin: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse { path: origin.to_path_buf(), message: e.to_string() }
}

pub fn parse_topology(text: &str, origin: &Path) -> Result<Topology> {
    let file: TopologyFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    file.build().map_err(|e| parse_error(origin, e))
}

/// Loads a topology from a file path, falling back to a corpus name.
pub fn load_topology(path: &Path) -> Result<Topology> {
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return parse_topology(&text, path);
    }
    let name = path.to_string_lossy();
    match corpus::topology(&name) {
        Some(text) => parse_topology(text, path),
        None => Err(Error::config(format!("no topology file or corpus entry named {name:?}"))),
    }
}

/// `x` or `[x, v]` for one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Position(f64),
    State([f64; 2]),
}

impl AxisValue {
    fn state(self) -> (f64, f64) {
        match self {
            AxisValue::Position(x) => (x, 0.0),
            AxisValue::State([x, v]) => (x, v),
        }
    }
}

/// A scalar applied to every axis, or one entry per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeValue {
    All(f64),
    PerAxis(Vec<AxisValue>),
}

impl NodeValue {
    fn per_axis(&self, axes: usize, node: &str, what: &str) -> Result<Vec<(f64, f64)>> {
        match self {
            NodeValue::All(x) => Ok(vec![(*x, 0.0); axes]),
            NodeValue::PerAxis(vals) if vals.len() == axes => Ok(vals.iter().map(|v| v.state()).collect()),
            NodeValue::PerAxis(vals) => Err(Error::config(format!(
                "{what} of node {node} has {} entries for {axes} axes",
                vals.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageLogSpec {
    Keyword(String),
    FirstRounds(usize),
}

fn default_axes() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub algorithm: Algorithm,
    pub topology: String,
    pub f: usize,
    pub l: usize,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_axes")]
    pub axes: usize,
    pub reference: ReferenceFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_messages: Option<MessageLogSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub init: BTreeMap<String, NodeValue>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub delta: BTreeMap<String, NodeValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adversaries: Vec<AttackScript>,
}

fn node_key(key: &str, n: usize) -> Result<NodeId> {
    let node: NodeId = key.trim().parse().map_err(|_| Error::config(format!("{key:?} is not a node id")))?;
    if node == 0 || node > n {
        return Err(Error::InvalidNode { node, n });
    }
    Ok(node)
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| parse_error(origin, e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Canonical text: re-serialised after parsing.
    pub fn canonicalize(text: &str, origin: &Path) -> Result<String> {
        Self::parse(text, origin)?.to_toml()
    }

    /// Builds the scenario against an already loaded topology. Structural
    /// problems are errors; semantic checks are left to
    /// [`Scenario::validate`].
    pub fn build(&self, topology: &Topology, fallback_name: &str) -> Result<Scenario> {
        let n = topology.schedule.node_count();
        let axes = self.axes;
        if axes == 0 {
            return Err(Error::config("axes must be at least 1"));
        }
        let adversarial: NodeSet = self.adversaries.iter().map(|a| a.node).collect();
        let mut initial = vec![vec![(0.0, 0.0); n]; axes];
        let mut seen = NodeSet::EMPTY;
        for (key, value) in &self.init {
            let node = node_key(key, n)?;
            for (axis, state) in value.per_axis(axes, key, "initial state")?.into_iter().enumerate() {
                initial[axis][node - 1] = state;
            }
            seen.insert(node);
        }
        let missing = NodeSet::full(n).difference(topology.leaders).difference(adversarial).difference(seen);
        if !missing.is_empty() {
            return Err(Error::config(format!("normal followers {missing} have no initial state")));
        }
        let mut delta = vec![vec![0.0; n]; axes];
        for (key, value) in &self.delta {
            let node = node_key(key, n)?;
            for (axis, (d, v)) in value.per_axis(axes, key, "offset")?.into_iter().enumerate() {
                if v != 0.0 {
                    return Err(Error::config(format!("offset of node {node} must be a position, not [x, v]")));
                }
                delta[axis][node - 1] = d;
            }
        }
        let defaults = EngineOptions::default();
        let log_messages = match &self.log_messages {
            None => MessageLog::None,
            Some(MessageLogSpec::Keyword(k)) if k == "none" => MessageLog::None,
            Some(MessageLogSpec::Keyword(k)) if k == "all" => MessageLog::All,
            Some(MessageLogSpec::FirstRounds(r)) => MessageLog::FirstRounds(*r),
            Some(MessageLogSpec::Keyword(k)) => {
                return Err(Error::config(format!("log_messages must be \"none\", \"all\" or a round count, got {k:?}")))
            }
        };
        if self.algorithm.is_second_order() && (self.t.is_none() || self.beta.is_none()) {
            return Err(Error::config("second-order scenarios must set T and beta"));
        }
        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| fallback_name.to_string()),
            algorithm: self.algorithm,
            schedule: topology.schedule.clone(),
            leaders: topology.leaders,
            f: self.f,
            l: self.l,
            t: self.t.unwrap_or(0.8),
            beta: self.beta.unwrap_or(1.65),
            reference: self.reference.clone(),
            initial,
            delta,
            adversaries: self.adversaries.clone(),
            options: EngineOptions {
                tol: self.tol.unwrap_or(defaults.tol),
                window: self.window.unwrap_or(defaults.window),
                max_rounds: self.max_rounds.unwrap_or(defaults.max_rounds),
                rounds: self.rounds,
                log_messages,
            },
        })
    }
}

/// Resolves a scenario's topology reference: a path relative to `base`, or
/// a corpus name.
pub fn resolve_topology(reference: &str, base: Option<&Path>) -> Result<Topology> {
    if let Some(dir) = base {
        let candidate = dir.join(reference);
        if candidate.exists() {
            return load_topology(&candidate);
        }
    }
    load_topology(Path::new(reference))
}

/// Parses scenario text; `base` is the directory relative topology paths are
/// resolved against.
pub fn parse_scenario(text: &str, origin: &Path, base: Option<&Path>) -> Result<(Scenario, ScenarioFile)> {
    let file = ScenarioFile::parse(text, origin)?;
    let topology = resolve_topology(&file.topology, base)?;
    let stem = origin.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
    let scenario = file.build(&topology, &stem)?;
    Ok((scenario, file))
}

/// Loads a scenario from a file path, falling back to a corpus name.
pub fn load_scenario(path: &Path) -> Result<(Scenario, ScenarioFile)> {
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return parse_scenario(&text, path, path.parent());
    }
    let name = path.to_string_lossy();
    match corpus::scenario(&name) {
        Some(text) => parse_scenario(text, &PathBuf::from(format!("{name}.toml")), None),
        None => Err(Error::config(format!("no scenario file or corpus entry named {name:?}"))),
    }
}

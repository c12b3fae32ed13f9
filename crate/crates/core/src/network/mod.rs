//! Network topology, independent-flow basis, finite-volume cell grids and
//! decomposition plans.

mod cells;
mod decompose;
pub mod fixtures;
mod flow_basis;

pub use cells::{cell_count, distribute_cells, CellGrid};
pub use decompose::{decompose, DecompositionPlan, Subnetwork};
pub use flow_basis::{build_flow_basis, FlowBasis, FundamentalCycle};

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("network schema violation: {0}")]
    Schema(String),
    #[error("network graph is disconnected: node {0} is unreachable from the source")]
    Disconnected(String),
    #[error("edge {edge}: {field} must be {requirement}, got {value}")]
    InvalidParameter { edge: String, field: &'static str, requirement: &'static str, value: f64 },
    #[error("exactly one source node is supported, got {0}")]
    MultipleSources(usize),
    #[error("invalid consumer {consumer}: {reason}")]
    InvalidConsumer { consumer: String, reason: String },
    #[error("isolated node {0} makes the incidence structure singular")]
    IsolatedNode(String),
    #[error("cell distribution: {0}")]
    Cells(String),
    #[error("decomposition: {0}")]
    Decomposition(String),
}

/// Identifier as written in the network file: integer or string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_string())
    }
}

impl From<i64> for Label {
    fn from(i: i64) -> Self {
        Label::Int(i)
    }
}

/// A pipe between two nodes. The reference orientation is `from -> to`.
#[derive(Clone, Debug, PartialEq)]
pub struct PipeEdge {
    pub id: Label,
    pub from: usize,
    pub to: usize,
    /// Length in m.
    pub length: f64,
    /// Inner diameter in m.
    pub diameter: f64,
    /// Darcy friction factor.
    pub friction: f64,
    /// Heat transfer coefficient to the ground in W/(m² K).
    pub heat_transfer: f64,
    /// Height difference `z(to) - z(from)` in m.
    pub height_delta: f64,
}

impl PipeEdge {
    /// Cross section in m².
    pub fn cross_section(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    pub fn volume(&self) -> f64 {
        self.cross_section() * self.length
    }
}

/// A house drawing water at the outlet of a leaf edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Consumer {
    pub id: Label,
    pub edge: usize,
}

/// Validated network. Nodes are indexed in order of first appearance.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    pub nodes: Vec<Label>,
    pub edges: Vec<PipeEdge>,
    pub consumers: Vec<Consumer>,
    pub source: usize,
    /// `node -> [(edge, +1 if the edge leaves the node, -1 if it enters)]`.
    incidence: Vec<Vec<(usize, i8)>>,
}

/// On-disk JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub edges: Vec<EdgeRecord>,
    pub consumers: Vec<ConsumerRecord>,
    pub source_node: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: Label,
    pub from: Label,
    pub to: Label,
    pub length_m: f64,
    pub diameter_m: f64,
    pub lambda: f64,
    #[serde(default)]
    #[serde(rename = "k_W_m2K")]
    pub k_w_m2k: f64,
    #[serde(default)]
    pub dz_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerRecord {
    pub id: Label,
    pub edge: Label,
}

/// Reads and validates a network JSON file.
pub fn parse_network(path: impl AsRef<Path>) -> Result<NetworkTopology, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })?;
    NetworkTopology::from_json(&text)
}

impl NetworkTopology {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serialization")
    }

    /// Stable content hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file()).expect("network serialization");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn from_file(file: &NetworkFile) -> Result<Self, NetworkError> {
        let source_label: Label = match &file.source_node {
            serde_json::Value::Array(items) if items.len() == 1 => serde_json::from_value(items[0].clone())
                .map_err(|e| NetworkError::Schema(format!("source_node: {e}")))?,
            serde_json::Value::Array(items) => return Err(NetworkError::MultipleSources(items.len())),
            other => {
                serde_json::from_value(other.clone()).map_err(|e| NetworkError::Schema(format!("source_node: {e}")))?
            }
        };

        let mut nodes = Vec::new();
        let mut node_index: HashMap<Label, usize> = HashMap::new();
        let mut intern = |label: &Label, nodes: &mut Vec<Label>| -> usize {
            *node_index.entry(label.clone()).or_insert_with(|| {
                nodes.push(label.clone());
                nodes.len() - 1
            })
        };

        let mut edges = Vec::with_capacity(file.edges.len());
        let mut edge_index = HashMap::new();
        for rec in &file.edges {
            let from = intern(&rec.from, &mut nodes);
            let to = intern(&rec.to, &mut nodes);
            if edge_index.insert(rec.id.clone(), edges.len()).is_some() {
                return Err(NetworkError::Schema(format!("duplicate edge id {}", rec.id)));
            }
            if from == to {
                return Err(NetworkError::Schema(format!("edge {} is a self loop", rec.id)));
            }
            edges.push(PipeEdge {
                id: rec.id.clone(),
                from,
                to,
                length: rec.length_m,
                diameter: rec.diameter_m,
                friction: rec.lambda,
                heat_transfer: rec.k_w_m2k,
                height_delta: rec.dz_m,
            });
        }
        if edges.is_empty() {
            return Err(NetworkError::Schema("network has no edges".into()));
        }
        let source = *node_index
            .get(&source_label)
            .ok_or_else(|| NetworkError::Schema(format!("source node {source_label} is not an edge endpoint")))?;

        let mut consumers = Vec::with_capacity(file.consumers.len());
        for rec in &file.consumers {
            let edge = *edge_index.get(&rec.edge).ok_or_else(|| NetworkError::InvalidConsumer {
                consumer: rec.id.to_string(),
                reason: format!("unknown edge {}", rec.edge),
            })?;
            consumers.push(Consumer { id: rec.id.clone(), edge });
        }
        Self::new(nodes, edges, consumers, source)
    }

    /// Builds and validates a topology from already indexed parts.
    pub fn new(
        nodes: Vec<Label>,
        edges: Vec<PipeEdge>,
        consumers: Vec<Consumer>,
        source: usize,
    ) -> Result<Self, NetworkError> {
        for e in &edges {
            check_param(e, "length_m", e.length, e.length > 0.0, "> 0")?;
            check_param(e, "diameter_m", e.diameter, e.diameter > 0.0, "> 0")?;
            check_param(e, "lambda", e.friction, e.friction >= 0.0, ">= 0")?;
            check_param(e, "k_W_m2K", e.heat_transfer, e.heat_transfer >= 0.0, ">= 0")?;
            check_param(e, "dz_m", e.height_delta, true, "finite")?;
            if e.from >= nodes.len() || e.to >= nodes.len() {
                return Err(NetworkError::Schema(format!("edge {} references unknown node", e.id)));
            }
        }
        if source >= nodes.len() {
            return Err(NetworkError::Schema("source node index out of range".into()));
        }
        let mut incidence = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            incidence[e.from].push((i, 1));
            incidence[e.to].push((i, -1));
        }
        if let Some(n) = incidence.iter().position(|inc| inc.is_empty()) {
            return Err(NetworkError::IsolatedNode(nodes[n].to_string()));
        }

        let topo = NetworkTopology { nodes, edges, consumers, source, incidence };
        topo.check_connected()?;
        topo.check_consumers()?;
        Ok(topo)
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.source]);
        seen[self.source] = true;
        while let Some(n) = queue.pop_front() {
            for &(e, _) in &self.incidence[n] {
                let m = self.other_end(e, n);
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(n) => Err(NetworkError::Disconnected(self.nodes[n].to_string())),
            None => Ok(()),
        }
    }

    fn check_consumers(&self) -> Result<(), NetworkError> {
        if self.consumers.is_empty() {
            return Err(NetworkError::Schema("network has no consumers".into()));
        }
        let mut used = vec![false; self.edges.len()];
        for c in &self.consumers {
            let fail =
                |reason: &str| NetworkError::InvalidConsumer { consumer: c.id.to_string(), reason: reason.to_string() };
            if c.edge >= self.edges.len() {
                return Err(fail("edge index out of range"));
            }
            if std::mem::replace(&mut used[c.edge], true) {
                return Err(fail("edge already carries another consumer"));
            }
            let house = self.edges[c.edge].to;
            if house == self.source {
                return Err(fail("consumer edge must not end at the source"));
            }
            if self.incidence[house].len() != 1 {
                return Err(fail("consumer edge must end in a leaf node"));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for c in &self.consumers {
            if !ids.insert(&c.id) {
                return Err(NetworkError::InvalidConsumer {
                    consumer: c.id.to_string(),
                    reason: "duplicate consumer id".into(),
                });
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id.clone(),
                    from: self.nodes[e.from].clone(),
                    to: self.nodes[e.to].clone(),
                    length_m: e.length,
                    diameter_m: e.diameter,
                    lambda: e.friction,
                    k_w_m2k: e.heat_transfer,
                    dz_m: e.height_delta,
                })
                .collect(),
            consumers: self
                .consumers
                .iter()
                .map(|c| ConsumerRecord { id: c.id.clone(), edge: self.edges[c.edge].id.clone() })
                .collect(),
            source_node: serde_json::to_value(&self.nodes[self.source]).expect("label"),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_consumers(&self) -> usize {
        self.consumers.len()
    }

    /// Number of fundamental cycles, `E - N + 1` for a connected graph.
    pub fn n_cycles(&self) -> usize {
        self.edges.len() + 1 - self.nodes.len()
    }

    /// Number of independent volume flows `L = H + cycles`.
    pub fn n_flows(&self) -> usize {
        self.n_consumers() + self.n_cycles()
    }

    pub fn incidence(&self, node: usize) -> &[(usize, i8)] {
        &self.incidence[node]
    }

    pub fn other_end(&self, edge: usize, node: usize) -> usize {
        let e = &self.edges[edge];
        if e.from == node {
            e.to
        } else {
            e.from
        }
    }

    /// Index of the consumer whose edge ends in `node`, if any.
    pub fn consumer_at_node(&self, node: usize) -> Option<usize> {
        self.consumers.iter().position(|c| self.edges[c.edge].to == node)
    }

    pub fn consumer_labels(&self) -> Vec<String> {
        self.consumers.iter().map(|c| c.id.to_string()).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.edges.iter().map(PipeEdge::volume).sum()
    }

    /// Edge index by label.
    pub fn edge_by_label(&self, label: &Label) -> Option<usize> {
        self.edges.iter().position(|e| &e.id == label)
    }

    /// Returns a copy with the edges listed in `edges` reversed in their
    /// reference orientation (and `dz` negated).
    pub fn with_reversed_edges(&self, edges: &[usize]) -> Result<Self, NetworkError> {
        let mut out = self.clone();
        for &i in edges {
            let e = &mut out.edges[i];
            std::mem::swap(&mut e.from, &mut e.to);
            e.height_delta = -e.height_delta;
        }
        Self::new(out.nodes, out.edges, out.consumers, out.source)
    }
}

fn check_param(
    e: &PipeEdge,
    field: &'static str,
    value: f64,
    ok: bool,
    requirement: &'static str,
) -> Result<(), NetworkError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(NetworkError::InvalidParameter { edge: e.id.to_string(), field, requirement, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pipe() -> &'static str {
        r#"{"edges":[{"id":"p","from":"S","to":"H","length_m":100,"diameter_m":0.1,
            "lambda":0.02,"k_W_m2K":0,"dz_m":0}],
            "consumers":[{"id":"h1","edge":"p"}],"source_node":"S"}"#
    }

    #[test]
    fn single_pipe_counts() {
        let t = NetworkTopology::from_json(single_pipe()).unwrap();
        assert_eq!((t.n_edges(), t.n_consumers(), t.n_flows()), (1, 1, 1));
        assert_eq!(t.n_cycles(), 0);
    }

    #[test]
    fn parallel_pipes_form_one_cycle() {
        let json = r#"{"edges":[
            {"id":1,"from":0,"to":1,"length_m":50,"diameter_m":0.1,"lambda":0.02},
            {"id":2,"from":0,"to":1,"length_m":50,"diameter_m":0.1,"lambda":0.02},
            {"id":3,"from":1,"to":2,"length_m":10,"diameter_m":0.05,"lambda":0.02}],
            "consumers":[{"id":"h","edge":3}],"source_node":0}"#;
        let t = NetworkTopology::from_json(json).unwrap();
        assert_eq!(t.n_cycles(), 1);
        assert_eq!(t.n_flows(), t.n_consumers() + 1);
    }

    #[test]
    fn negative_diameter_rejected() {
        let json = single_pipe().replace("\"diameter_m\":0.1", "\"diameter_m\":-0.1");
        let err = NetworkTopology::from_json(&json).unwrap_err();
        assert!(matches!(err, NetworkError::InvalidParameter { field: "diameter_m", .. }));
    }

    #[test]
    fn disconnected_rejected() {
        let json = r#"{"edges":[
            {"id":"a","from":"S","to":"H","length_m":1,"diameter_m":0.1,"lambda":0.02},
            {"id":"b","from":"X","to":"Y","length_m":1,"diameter_m":0.1,"lambda":0.02}],
            "consumers":[{"id":"h","edge":"a"}],"source_node":"S"}"#;
        assert!(matches!(NetworkTopology::from_json(json).unwrap_err(), NetworkError::Disconnected(_)));
    }

    #[test]
    fn multiple_sources_rejected() {
        let json = single_pipe().replace("\"source_node\":\"S\"", "\"source_node\":[\"S\",\"H\"]");
        assert!(matches!(NetworkTopology::from_json(&json).unwrap_err(), NetworkError::MultipleSources(2)));
    }

    #[test]
    fn schema_violation_reported() {
        let json = single_pipe().replace("\"length_m\"", "\"len\"");
        assert!(matches!(NetworkTopology::from_json(&json).unwrap_err(), NetworkError::Schema(_)));
    }

    #[test]
    fn consumer_must_sit_on_leaf() {
        let json = r#"{"edges":[
            {"id":"a","from":"S","to":"J","length_m":1,"diameter_m":0.1,"lambda":0.02},
            {"id":"b","from":"J","to":"H","length_m":1,"diameter_m":0.1,"lambda":0.02}],
            "consumers":[{"id":"h","edge":"a"}],"source_node":"S"}"#;
        assert!(matches!(NetworkTopology::from_json(json).unwrap_err(), NetworkError::InvalidConsumer { .. }));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let json = single_pipe().replace("100", "123.45678901234567");
        let t = NetworkTopology::from_json(&json).unwrap();
        let back = NetworkTopology::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        assert_eq!(back.edges[0].length, 123.45678901234567);
    }
}

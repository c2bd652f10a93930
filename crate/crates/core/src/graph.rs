//! Directed, relation-labeled multigraphs shared by text and code.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Suffix marking an inverse relation name.
pub const INVERSE_SUFFIX: &str = "⁻¹";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Text,
    Code,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GraphNode {
    pub token: String,
    pub is_terminal: bool,
}

impl GraphNode {
    pub fn new(token: impl Into<String>, is_terminal: bool) -> Self {
        Self {
            token: token.into(),
            is_terminal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
}

impl Edge {
    pub fn new(src: usize, dst: usize, rel: usize) -> Self {
        Self { src, dst, rel }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationVocab {
    names: Vec<String>,
}

impl RelationVocab {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::Argument("empty relation name".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Argument(format!("duplicate relation {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// True once inverse relations have been appended.
    pub fn has_inverses(&self) -> bool {
        self.names.iter().any(|n| is_inverse(n))
    }

    /// Canonical names followed by their inverses, in the same order.
    pub fn with_inverses(&self) -> Result<Self> {
        if self.has_inverses() {
            return Err(Error::State("relation vocabulary already has inverses".into()));
        }
        let mut names = self.names.clone();
        names.extend(self.names.iter().map(|n| inverse_name(n)));
        Self::new(names)
    }
}

pub fn inverse_name(name: &str) -> String {
    format!("{name}{INVERSE_SUFFIX}")
}

pub fn is_inverse(name: &str) -> bool {
    name.ends_with(INVERSE_SUFFIX)
}

/// Structural problems found by [`validate_graph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyGraph,
    EmptyToken { node: usize },
    DanglingEndpoint { edge: usize },
    BadRelation { edge: usize },
    NodeCapExceeded { nodes: usize, cap: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "empty graph"),
            Violation::EmptyToken { node } => write!(f, "node {node}: empty token"),
            Violation::DanglingEndpoint { edge } => write!(f, "edge {edge}: dangling endpoint"),
            Violation::BadRelation { edge } => write!(f, "edge {edge}: bad relation id"),
            Violation::NodeCapExceeded { nodes, cap } => {
                write!(f, "node cap exceeded: {nodes} > {cap}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        Err(Error::Argument(format!("invalid graph: {}", msgs.join("; "))))
    }
}

/// Checks node/edge/relation consistency over raw parts. `cap` optionally bounds
/// the node count.
pub fn validate_parts(
    nodes: &[GraphNode],
    edges: &[Edge],
    relation_count: usize,
    cap: Option<usize>,
) -> ValidationReport {
    let mut violations = Vec::new();
    if nodes.is_empty() {
        violations.push(Violation::EmptyGraph);
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.token.is_empty() {
            violations.push(Violation::EmptyToken { node: i });
        }
    }
    for (i, e) in edges.iter().enumerate() {
        if e.src >= nodes.len() || e.dst >= nodes.len() {
            violations.push(Violation::DanglingEndpoint { edge: i });
        }
        if e.rel >= relation_count {
            violations.push(Violation::BadRelation { edge: i });
        }
    }
    if let Some(cap) = cap {
        if nodes.len() > cap {
            violations.push(Violation::NodeCapExceeded {
                nodes: nodes.len(),
                cap,
            });
        }
    }
    ValidationReport { violations }
}

pub fn validate_graph(g: &LabeledMultigraph, cap: Option<usize>) -> ValidationReport {
    validate_parts(&g.nodes, &g.edges, g.relations.len(), cap)
}

/// Immutable directed multigraph with typed edges. Node ids are dense indices in
/// insertion order; edges are deduplicated and sorted by `(src, dst, rel)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledMultigraph {
    kind: GraphKind,
    relations: RelationVocab,
    nodes: Vec<GraphNode>,
    edges: Vec<Edge>,
}

impl LabeledMultigraph {
    pub fn new(
        kind: GraphKind,
        relations: RelationVocab,
        nodes: Vec<GraphNode>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let edges: Vec<Edge> = edges.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        validate_parts(&nodes, &edges, relations.len(), None).into_result()?;
        Ok(Self {
            kind,
            relations,
            nodes,
            edges,
        })
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn relations(&self) -> &RelationVocab {
        &self.relations
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_augmented(&self) -> bool {
        self.relations.has_inverses()
    }

    /// Edges carrying relation `name`.
    pub fn edges_named<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        let rel = self.relations.id(name);
        self.edges.iter().filter(move |e| Some(e.rel) == rel)
    }

    /// Sources of edges `(s, node, rel)`, ascending and without repeats.
    pub fn in_neighbors(&self, node: usize, rel: usize) -> Result<Vec<usize>> {
        if node >= self.nodes.len() {
            return Err(Error::Argument(format!("node {node} out of range")));
        }
        if rel >= self.relations.len() {
            return Err(Error::Argument(format!("relation {rel} out of range")));
        }
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.dst == node && e.rel == rel)
            .map(|e| e.src)
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Adds `(d, s, r⁻¹)` for every edge `(s, d, r)`; inverse of relation `r`
    /// gets id `r + k` for `k` canonical relations.
    pub fn augment_inverses(&self) -> Result<Self> {
        if self.is_augmented() {
            return Err(Error::State("graph is already inverse-augmented".into()));
        }
        let k = self.relations.len();
        let relations = self.relations.with_inverses()?;
        let inverse = self.edges.iter().map(|e| Edge::new(e.dst, e.src, e.rel + k));
        let edges: Vec<Edge> = self.edges.iter().copied().chain(inverse).collect();
        Self::new(self.kind, relations, self.nodes.clone(), edges)
    }

    /// Same graph with nodes reordered: new node `i` is old node `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.nodes.len();
        let mut new_id = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::Argument("permutation length mismatch".into()));
        }
        for (new, &old) in order.iter().enumerate() {
            if old >= n || new_id[old] != usize::MAX {
                return Err(Error::Argument("not a permutation".into()));
            }
            new_id[old] = new;
        }
        let nodes = order.iter().map(|&o| self.nodes[o].clone()).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(new_id[e.src], new_id[e.dst], e.rel));
        Self::new(self.kind, self.relations.clone(), nodes, edges)
    }

    pub fn to_json(&self) -> Vec<u8> {
        encode_graph_json(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        decode_graph_json(bytes)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    token: String,
    terminal: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    kind: GraphKind,
    relations: Vec<String>,
    nodes: Vec<NodeJson>,
    edges: Vec<[usize; 3]>,
}

impl From<&LabeledMultigraph> for GraphJson {
    fn from(g: &LabeledMultigraph) -> Self {
        GraphJson {
            kind: g.kind,
            relations: g.relations.names.clone(),
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeJson {
                    token: n.token.clone(),
                    terminal: n.is_terminal,
                })
                .collect(),
            edges: g.edges.iter().map(|e| [e.src, e.dst, e.rel]).collect(),
        }
    }
}

impl Serialize for LabeledMultigraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledMultigraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        graph_from_json(raw).map_err(serde::de::Error::custom)
    }
}

fn graph_from_json(raw: GraphJson) -> Result<LabeledMultigraph> {
    let relations = RelationVocab::new(raw.relations)?;
    let nodes: Vec<GraphNode> = raw
        .nodes
        .into_iter()
        .map(|n| GraphNode::new(n.token, n.terminal))
        .collect();
    let edges: Vec<Edge> = raw.edges.iter().map(|&[s, d, r]| Edge::new(s, d, r)).collect();
    LabeledMultigraph::new(raw.kind, relations, nodes, edges)
}

/// Compact canonical JSON: keys `kind, relations, nodes, edges`, edges sorted.
pub fn encode_graph_json(g: &LabeledMultigraph) -> Vec<u8> {
    serde_json::to_vec(&GraphJson::from(g)).expect("graph serialization is infallible")
}

pub fn decode_graph_json(bytes: &[u8]) -> Result<LabeledMultigraph> {
    let raw: GraphJson = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse_at(format!("byte {}", json_error_offset(bytes, &e)), e.to_string()))?;
    graph_from_json(raw).map_err(|e| Error::parse_at("graph", e.to_string()))
}

/// Converts serde_json's 1-based line/column to a byte offset into `bytes`.
pub(crate) fn json_error_offset(bytes: &[u8], e: &serde_json::Error) -> usize {
    let (line, col) = (e.line(), e.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + col.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

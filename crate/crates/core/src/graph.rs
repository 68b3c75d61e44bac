//! The editable causal graph of one outcome, its JSON form, and the edit
//! operations applied to it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{EdgeEffect, EffectSign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeSource {
    #[serde(rename = "PC")]
    Pc,
    Continuous,
    Hybrid,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    /// Undirected edges come from an unoriented PC backbone; `from`/`to` is
    /// then only a storage order.
    pub directed: bool,
    pub sources: BTreeSet<EdgeSource>,
    pub effect: Option<EdgeEffect>,
    /// Display flag filled in when a layout is attached.
    pub reversed: Option<bool>,
}

impl GraphEdge {
    pub fn directed(from: impl Into<String>, to: impl Into<String>, source: EdgeSource) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            directed: true,
            sources: BTreeSet::from([source]),
            effect: None,
            reversed: None,
        }
    }

    pub fn undirected(a: impl Into<String>, b: impl Into<String>, source: EdgeSource) -> Self {
        Self { directed: false, ..Self::directed(a, b, source) }
    }

    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: String,
    to: String,
    #[serde(default = "yes")]
    directed: bool,
    #[serde(default)]
    effect: Option<f64>,
    #[serde(default)]
    display_weight: Option<f64>,
    #[serde(default)]
    sign: Option<EffectSign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adjustment_set: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contrast: Option<String>,
    #[serde(default)]
    sources: BTreeSet<EdgeSource>,
    #[serde(default)]
    reversed: Option<bool>,
}

fn yes() -> bool {
    true
}

impl From<&GraphEdge> for EdgeDoc {
    fn from(e: &GraphEdge) -> Self {
        let eff = e.effect.as_ref();
        EdgeDoc {
            from: e.from.clone(),
            to: e.to.clone(),
            directed: e.directed,
            effect: eff.map(|f| f.effect),
            display_weight: eff.map(|f| f.display_weight),
            sign: eff.map(|f| f.sign),
            std_error: eff.map(|f| f.std_error),
            adjustment_set: eff.map(|f| f.adjustment_set.clone()),
            contrast: eff.and_then(|f| f.contrast.clone()),
            sources: e.sources.clone(),
            reversed: e.reversed,
        }
    }
}

impl Serialize for GraphEdge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EdgeDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GraphEdge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = EdgeDoc::deserialize(d)?;
        let effect = match doc.effect {
            Some(v) if v.is_finite() => Some(EdgeEffect::new(
                doc.from.clone(),
                doc.to.clone(),
                doc.adjustment_set.unwrap_or_default(),
                v,
                doc.std_error.unwrap_or(f64::NAN),
                doc.contrast,
            )),
            Some(_) => return Err(serde::de::Error::custom("edge effect must be finite")),
            None => None,
        };
        Ok(GraphEdge {
            from: doc.from,
            to: doc.to,
            directed: doc.directed,
            sources: doc.sources,
            effect,
            reversed: doc.reversed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub rank: usize,
    pub order: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("outcome {0:?} is not a node")]
    MissingOutcome(String),
    #[error("duplicate node {0:?}")]
    DuplicateNode(String),
    #[error("edge endpoint {0:?} is not a node")]
    UnknownEndpoint(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge between {0:?} and {1:?}")]
    DuplicateEdge(String, String),
    #[error("directed edges contain the cycle {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

/// A DAG over named variables with one designated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc")]
pub struct CausalGraph {
    pub id: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<BTreeMap<String, NodePosition>>,
}

#[derive(Deserialize)]
struct GraphDoc {
    id: String,
    outcome: String,
    #[serde(default)]
    dataset: Option<String>,
    nodes: Vec<String>,
    #[serde(default)]
    edges: Vec<GraphEdge>,
    #[serde(default)]
    version: u64,
    #[serde(default)]
    layout: Option<BTreeMap<String, NodePosition>>,
}

impl TryFrom<GraphDoc> for CausalGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDoc) -> Result<Self, GraphError> {
        let g = CausalGraph {
            id: doc.id,
            outcome: doc.outcome,
            dataset: doc.dataset,
            nodes: doc.nodes,
            edges: doc.edges,
            version: doc.version,
            layout: doc.layout,
        };
        g.validate()?;
        Ok(g)
    }
}

impl CausalGraph {
    pub fn new(id: impl Into<String>, outcome: impl Into<String>, nodes: Vec<String>, edges: Vec<GraphEdge>) -> Result<Self, GraphError> {
        let g = CausalGraph {
            id: id.into(),
            outcome: outcome.into(),
            dataset: None,
            nodes,
            edges,
            version: 0,
            layout: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.as_str()) {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        if !seen.contains(self.outcome.as_str()) {
            return Err(GraphError::MissingOutcome(self.outcome.clone()));
        }
        let mut pairs = BTreeSet::new();
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !seen.contains(end.as_str()) {
                    return Err(GraphError::UnknownEndpoint(end.clone()));
                }
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e.from.clone()));
            }
            let key = unordered(&e.from, &e.to);
            if !pairs.insert(key) {
                return Err(GraphError::DuplicateEdge(e.from.clone(), e.to.clone()));
            }
        }
        if let Some(cycle) = find_cycle(&self.nodes, self.directed_pairs()) {
            return Err(GraphError::Cycle(cycle));
        }
        Ok(())
    }

    pub fn directed_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().filter(|e| e.directed).map(|e| (e.from.as_str(), e.to.as_str()))
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n == name)
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn parents(&self, node: &str) -> Vec<String> {
        let mut p: Vec<String> = self.directed_pairs().filter(|(_, t)| *t == node).map(|(f, _)| f.to_string()).collect();
        p.sort();
        p
    }

    pub fn children(&self, node: &str) -> Vec<String> {
        let mut c: Vec<String> = self.directed_pairs().filter(|(f, _)| *f == node).map(|(_, t)| t.to_string()).collect();
        c.sort();
        c
    }

    /// Strict descendants along directed edges.
    pub fn descendants(&self, node: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([node.to_string()]);
        while let Some(cur) = queue.pop_front() {
            for c in self.children(&cur) {
                if out.insert(c.clone()) {
                    queue.push_back(c);
                }
            }
        }
        out
    }

    pub fn has_directed_path(&self, from: &str, to: &str) -> bool {
        self.descendants(from).contains(to)
    }

    /// Drops per-edge effects so they are recomputed on the next read.
    pub fn clear_effects(&mut self) {
        for e in &mut self.edges {
            e.effect = None;
        }
    }
}

pub(crate) fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Topological order of `nodes` (ties by name) or `None` on a cycle.
pub fn topological_order<'a>(nodes: &'a [String], edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Option<Vec<String>> {
    let mut indeg: BTreeMap<&str, usize> = nodes.iter().map(|n| (n.as_str(), 0)).collect();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, t) in edges {
        *indeg.get_mut(t)? += 1;
        succ.entry(f).or_default().push(t);
    }
    let mut ready: BTreeSet<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(n) = ready.pop_first() {
        order.push(n.to_string());
        for t in succ.get(n).into_iter().flatten() {
            let d = indeg.get_mut(t).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.insert(t);
            }
        }
    }
    (order.len() == nodes.len()).then_some(order)
}

/// Some directed cycle (first node repeated at the end), if any exists.
pub fn find_cycle<'a>(nodes: &'a [String], edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Option<Vec<String>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, t) in edges {
        succ.entry(f).or_default().push(t);
    }
    for v in succ.values_mut() {
        v.sort_unstable();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for start in nodes {
        if state.get(start.as_str()).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        state.insert(start.as_str(), 1);
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if top.1 < children.len() {
                let child = children[top.1];
                top.1 += 1;
                match state.get(child).copied().unwrap_or(0) {
                    0 => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                    }
                    1 => {
                        let pos = stack.iter().position(|(n, _)| *n == child).expect("on stack");
                        let mut cycle: Vec<String> = stack[pos..].iter().map(|(n, _)| n.to_string()).collect();
                        cycle.push(child.to_string());
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    None
}

/// Shortest directed path `from ⇝ to` (inclusive), if one exists.
pub fn directed_path<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>, from: &str, to: &str) -> Option<Vec<String>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, t) in edges {
        succ.entry(f).or_default().push(t);
    }
    for v in succ.values_mut() {
        v.sort_unstable();
    }
    let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut seen = BTreeSet::new();
    let start = succ.keys().find(|k| **k == from).copied()?;
    queue.push_back(start);
    seen.insert(start);
    while let Some(cur) = queue.pop_front() {
        if cur == to {
            let mut path = vec![cur.to_string()];
            let mut at = cur;
            while let Some(p) = prev.get(at) {
                path.push(p.to_string());
                at = p;
            }
            path.reverse();
            return Some(path);
        }
        for &n in succ.get(cur).into_iter().flatten() {
            if seen.insert(n) {
                prev.insert(n, cur);
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditKind {
    AddNode,
    RemoveNode,
    AddEdge,
    DeleteEdge,
    ReverseEdge,
}

impl EditKind {
    fn arity(self) -> usize {
        match self {
            EditKind::AddNode | EditKind::RemoveNode => 1,
            _ => 2,
        }
    }
}

/// One user edit, valid only against `base_version`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    pub payload: Vec<String>,
    pub base_version: u64,
}

impl EditOp {
    pub fn new(kind: EditKind, payload: &[&str], base_version: u64) -> Self {
        Self { kind, payload: payload.iter().map(|s| s.to_string()).collect(), base_version }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("graph is at version {current}, edit was based on {base}")]
    VersionConflict { current: u64, base: u64 },
    #[error("edit would create the cycle {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no edge {0:?} -> {1:?}")]
    UnknownEdge(String, String),
    #[error("node {0:?} already exists")]
    NodeExists(String),
    #[error("edge {0:?} -> {1:?} already exists")]
    EdgeExists(String, String),
    #[error("{kind:?} takes {expected} names, got {got}")]
    Payload { kind: EditKind, expected: usize, got: usize },
    #[error("the outcome node {0:?} cannot be removed")]
    OutcomeRemoval(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
}

/// Applies `op`, returning the next version of the graph. The input graph is
/// left untouched on error.
pub fn apply_edit(graph: &CausalGraph, op: &EditOp) -> Result<CausalGraph, EditError> {
    if op.base_version != graph.version {
        return Err(EditError::VersionConflict { current: graph.version, base: op.base_version });
    }
    if op.payload.len() != op.kind.arity() {
        return Err(EditError::Payload { kind: op.kind, expected: op.kind.arity(), got: op.payload.len() });
    }
    let mut g = graph.clone();
    let need = |g: &CausalGraph, n: &str| {
        if g.has_node(n) {
            Ok(())
        } else {
            Err(EditError::UnknownNode(n.to_string()))
        }
    };
    match op.kind {
        EditKind::AddNode => {
            let name = &op.payload[0];
            if name.is_empty() || g.has_node(name) {
                return Err(EditError::NodeExists(name.clone()));
            }
            g.nodes.push(name.clone());
        }
        EditKind::RemoveNode => {
            let name = &op.payload[0];
            need(&g, name)?;
            if *name == g.outcome {
                return Err(EditError::OutcomeRemoval(name.clone()));
            }
            g.nodes.retain(|n| n != name);
            g.edges.retain(|e| e.from != *name && e.to != *name);
        }
        EditKind::AddEdge => {
            let (from, to) = (&op.payload[0], &op.payload[1]);
            need(&g, from)?;
            need(&g, to)?;
            if from == to {
                return Err(EditError::SelfLoop(from.clone()));
            }
            match g.edges.iter().position(|e| e.connects(from, to)) {
                Some(i) if g.edges[i].directed && g.edges[i].from == *from => {
                    return Err(EditError::EdgeExists(from.clone(), to.clone()));
                }
                // Orienting an undirected backbone edge.
                Some(i) if !g.edges[i].directed => {
                    let e = &mut g.edges[i];
                    e.from = from.clone();
                    e.to = to.clone();
                    e.directed = true;
                    e.sources.insert(EdgeSource::User);
                }
                Some(_) => {
                    let path = directed_path(g.directed_pairs(), to, from).unwrap_or_default();
                    return Err(EditError::Cycle(close_cycle(path, to)));
                }
                None => {
                    if let Some(path) = directed_path(g.directed_pairs(), to, from) {
                        return Err(EditError::Cycle(close_cycle(path, to)));
                    }
                    g.edges.push(GraphEdge::directed(from.clone(), to.clone(), EdgeSource::User));
                }
            }
        }
        EditKind::DeleteEdge => {
            let (from, to) = (&op.payload[0], &op.payload[1]);
            let i = g
                .edges
                .iter()
                .position(|e| (e.from == *from && e.to == *to) || (!e.directed && e.connects(from, to)))
                .ok_or_else(|| EditError::UnknownEdge(from.clone(), to.clone()))?;
            g.edges.remove(i);
        }
        EditKind::ReverseEdge => {
            let (from, to) = (&op.payload[0], &op.payload[1]);
            let i = g
                .edges
                .iter()
                .position(|e| e.directed && e.from == *from && e.to == *to)
                .ok_or_else(|| EditError::UnknownEdge(from.clone(), to.clone()))?;
            let mut edge = g.edges.remove(i);
            if let Some(path) = directed_path(g.directed_pairs(), from, to) {
                return Err(EditError::Cycle(close_cycle(path, from)));
            }
            std::mem::swap(&mut edge.from, &mut edge.to);
            edge.sources.insert(EdgeSource::User);
            g.edges.insert(i, edge);
        }
    }
    g.clear_effects();
    g.layout = None;
    for e in &mut g.edges {
        e.reversed = None;
    }
    g.version += 1;
    Ok(g)
}

fn close_cycle(mut path: Vec<String>, start: &str) -> Vec<String> {
    path.push(start.to_string());
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn chain() -> CausalGraph {
        CausalGraph::new(
            "g",
            "C",
            names(&["A", "B", "C"]),
            vec![GraphEdge::directed("A", "B", EdgeSource::Pc), GraphEdge::directed("B", "C", EdgeSource::Pc)],
        )
        .unwrap()
    }

    #[test]
    fn reverse_single_edge() {
        let g = CausalGraph::new("g", "B", names(&["A", "B"]), vec![GraphEdge::directed("A", "B", EdgeSource::Pc)]).unwrap();
        let g2 = apply_edit(&g, &EditOp::new(EditKind::ReverseEdge, &["A", "B"], 0)).unwrap();
        assert_eq!(g2.version, 1);
        assert!(g2.edge("B", "A").is_some());
        assert!(g2.edge("A", "B").is_none());
    }

    #[test]
    fn add_edge_closing_cycle_is_reported() {
        let g = chain();
        let err = apply_edit(&g, &EditOp::new(EditKind::AddEdge, &["C", "A"], 0)).unwrap_err();
        assert_eq!(err, EditError::Cycle(names(&["A", "B", "C", "A"])));
        let err = apply_edit(&g, &EditOp::new(EditKind::ReverseEdge, &["A", "B"], 0));
        assert!(err.is_ok());
        let g2 = apply_edit(&g, &EditOp::new(EditKind::AddEdge, &["A", "C"], 0)).unwrap();
        let err = apply_edit(&g2, &EditOp::new(EditKind::ReverseEdge, &["A", "C"], 1)).unwrap_err();
        assert_eq!(err, EditError::Cycle(names(&["A", "B", "C", "A"])));
    }

    #[test]
    fn stale_version_conflicts() {
        let g = chain();
        let err = apply_edit(&g, &EditOp::new(EditKind::AddNode, &["D"], 7)).unwrap_err();
        assert_eq!(err, EditError::VersionConflict { current: 0, base: 7 });
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let g = chain();
        let g2 = apply_edit(&g, &EditOp::new(EditKind::RemoveNode, &["B"], 0)).unwrap();
        assert!(g2.edges.is_empty());
        assert_eq!(g2.nodes, names(&["A", "C"]));
        assert!(matches!(
            apply_edit(&g, &EditOp::new(EditKind::RemoveNode, &["C"], 0)),
            Err(EditError::OutcomeRemoval(_))
        ));
    }

    #[test]
    fn payload_arity_checked() {
        let g = chain();
        assert!(matches!(
            apply_edit(&g, &EditOp::new(EditKind::AddEdge, &["A"], 0)),
            Err(EditError::Payload { .. })
        ));
    }

    #[test]
    fn orienting_undirected_edge() {
        let g = CausalGraph::new("g", "B", names(&["A", "B"]), vec![GraphEdge::undirected("A", "B", EdgeSource::Pc)]).unwrap();
        let g2 = apply_edit(&g, &EditOp::new(EditKind::AddEdge, &["B", "A"], 0)).unwrap();
        let e = g2.edge("B", "A").unwrap();
        assert!(e.directed);
        assert!(e.sources.contains(&EdgeSource::User));
        let g3 = apply_edit(&g, &EditOp::new(EditKind::DeleteEdge, &["B", "A"], 0)).unwrap();
        assert!(g3.edges.is_empty());
    }

    #[test]
    fn cyclic_json_rejected() {
        let text = r#"{"id":"g","outcome":"A","nodes":["A","B"],"edges":[{"from":"A","to":"B"},{"from":"B","to":"A"}],"version":0}"#;
        assert!(serde_json::from_str::<CausalGraph>(text).is_err());
        let text = r#"{"id":"g","outcome":"A","nodes":["A","B"],"edges":[{"from":"A","to":"B","effect":-3.0,"sources":["PC"]}]}"#;
        let g: CausalGraph = serde_json::from_str(text).unwrap();
        let eff = g.edges[0].effect.as_ref().unwrap();
        assert_eq!(eff.sign, EffectSign::Negative);
        assert!((eff.display_weight - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cycle_finder_and_topo_order() {
        let nodes = names(&["A", "B", "C"]);
        assert_eq!(topological_order(&nodes, [("B", "A"), ("C", "A")]).unwrap(), names(&["B", "C", "A"]));
        assert!(find_cycle(&nodes, [("A", "B"), ("B", "C")]).is_none());
        let c = find_cycle(&nodes, [("A", "B"), ("B", "C"), ("C", "A")]).unwrap();
        assert_eq!(c.first(), c.last());
        assert_eq!(c.len(), 4);
    }
}

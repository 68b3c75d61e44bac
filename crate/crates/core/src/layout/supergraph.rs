//! Union of several outcome graphs laid out in one coordinate space.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::layered::{layered_layout, layering_edges, LaidEdge, LayeredLayout};
use super::LayoutError;
use crate::graph::{directed_path, unordered, CausalGraph};

/// One edge record of the union. Graphs that disagree on a direction
/// produce one record per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperEdge {
    pub from: String,
    pub to: String,
    pub directed: bool,
    /// Owning graph ids in selection order.
    pub owners: Vec<String>,
    pub reversed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bends: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLayout {
    pub graph_ids: Vec<String>,
    pub outcomes: BTreeMap<String, String>,
    /// Owning graph ids per node, in selection order.
    pub membership: BTreeMap<String, Vec<String>>,
    pub edges: Vec<SuperEdge>,
    /// Layout of the union under the majority direction of every pair.
    pub layout: LayeredLayout,
}

impl SuperLayout {
    pub fn is_shared(&self, node: &str) -> bool {
        self.membership.get(node).is_some_and(|m| m.len() >= 2)
    }

    pub fn nodes_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.membership.iter().filter(move |(_, m)| m.iter().any(|g| g == id)).map(|(n, _)| n)
    }

    pub fn edges_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SuperEdge> + 'a {
        self.edges.iter().filter(move |e| e.owners.iter().any(|g| g == id))
    }
}

/// Picks one direction per node pair for layering: the direction with most
/// owners (ties to the smaller source), strongest pairs first, flipping any
/// pair that would close a cycle among those already accepted.
fn majority_edges(records: &BTreeMap<(String, String, bool), Vec<String>>) -> Vec<(String, String)> {
    let mut votes: BTreeMap<(String, String), BTreeMap<(String, String), usize>> = BTreeMap::new();
    for ((a, b, _), owners) in records {
        *votes.entry(unordered(a, b)).or_default().entry((a.clone(), b.clone())).or_default() += owners.len();
    }
    let mut picks: Vec<(usize, String, String)> = votes
        .into_values()
        .map(|dirs| {
            let ((a, b), n) = dirs
                .into_iter()
                .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0 .0.cmp(&x.0 .0)))
                .expect("pair has a vote");
            (n, a, b)
        })
        .collect();
    picks.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2))));
    let mut accepted: Vec<(String, String)> = Vec::with_capacity(picks.len());
    for (_, a, b) in picks {
        let closes = directed_path(accepted.iter().map(|(p, q)| (p.as_str(), q.as_str())), &b, &a).is_some();
        accepted.push(if closes { (b, a) } else { (a, b) });
    }
    accepted
}

pub fn build_supergraph(graphs: &[CausalGraph]) -> Result<SuperLayout, LayoutError> {
    if graphs.len() < 2 {
        return Err(LayoutError::TooFewGraphs(graphs.len()));
    }
    let mut ids = BTreeSet::new();
    for g in graphs {
        if !ids.insert(g.id.as_str()) {
            return Err(LayoutError::DuplicateGraph(g.id.clone()));
        }
    }
    let mut membership: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut records: BTreeMap<(String, String, bool), Vec<String>> = BTreeMap::new();
    for g in graphs {
        for n in &g.nodes {
            membership.entry(n.clone()).or_default().push(g.id.clone());
        }
        for (e, (from, to)) in g.edges.iter().zip(layering_edges(g)) {
            records.entry((from, to, e.directed)).or_default().push(g.id.clone());
        }
    }
    let nodes: Vec<String> = membership.keys().cloned().collect();
    let layout = layered_layout(&nodes, &majority_edges(&records))?;
    let bends: BTreeMap<(&str, &str), &Vec<(f64, f64)>> =
        layout.edges.iter().map(|e| ((e.from.as_str(), e.to.as_str()), &e.bends)).collect();
    let edges = records
        .iter()
        .map(|((from, to, directed), owners)| {
            let rank = |n: &str| layout.nodes[n].rank;
            let b = match bends.get(&(from.as_str(), to.as_str())) {
                Some(b) => (*b).clone(),
                None => bends[&(to.as_str(), from.as_str())].iter().rev().copied().collect(),
            };
            SuperEdge {
                from: from.clone(),
                to: to.clone(),
                directed: *directed,
                owners: owners.clone(),
                reversed: *directed && rank(from) > rank(to),
                bends: b,
            }
        })
        .collect();
    Ok(SuperLayout {
        graph_ids: graphs.iter().map(|g| g.id.clone()).collect(),
        outcomes: graphs.iter().map(|g| (g.id.clone(), g.outcome.clone())).collect(),
        membership,
        edges,
        layout,
    })
}

/// Nodes and edges of one graph at their supergraph coordinates.
pub fn extract_subgraph(s: &SuperLayout, id: &str) -> Result<LayeredLayout, LayoutError> {
    if !s.graph_ids.iter().any(|g| g == id) {
        return Err(LayoutError::UnknownGraph(id.to_string()));
    }
    let mut out = LayeredLayout {
        nodes: s.nodes_of(id).map(|n| (n.clone(), s.layout.nodes[n])).collect(),
        edges: s
            .edges_of(id)
            .map(|e| LaidEdge {
                from: e.from.clone(),
                to: e.to.clone(),
                directed: e.directed,
                reversed: e.reversed,
                bends: e.bends.clone(),
            })
            .collect(),
    };
    out.reorder();
    Ok(out)
}

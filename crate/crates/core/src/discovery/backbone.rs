//! Turning a discovery snapshot into an editable graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Algorithm, DiscoveryError, DiscoverySnapshot};
use crate::graph::{unordered, CausalGraph, EdgeSource, GraphEdge};

/// One edge of a reference result shown next to the edited graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayEdge {
    pub from: String,
    pub to: String,
    pub directed: bool,
}

fn source(a: Algorithm) -> EdgeSource {
    match a {
        Algorithm::Pc => EdgeSource::Pc,
        Algorithm::Continuous => EdgeSource::Continuous,
        Algorithm::Hybrid => EdgeSource::Hybrid,
    }
}

/// Edge sets of every algorithm that has produced a result.
pub fn overlays(snap: &DiscoverySnapshot) -> BTreeMap<Algorithm, Vec<OverlayEdge>> {
    let mut out = BTreeMap::new();
    if let Some(pc) = &snap.pc {
        let mut v: Vec<OverlayEdge> = pc.directed.iter().map(|(a, b)| OverlayEdge { from: a.clone(), to: b.clone(), directed: true }).collect();
        v.extend(pc.undirected.iter().map(|(a, b)| OverlayEdge { from: a.clone(), to: b.clone(), directed: false }));
        out.insert(Algorithm::Pc, v);
    }
    if let Some(c) = &snap.continuous {
        out.insert(Algorithm::Continuous, c.edges.iter().map(|(a, b)| OverlayEdge { from: a.clone(), to: b.clone(), directed: true }).collect());
    }
    if let Some(h) = &snap.hybrid {
        out.insert(Algorithm::Hybrid, h.edges.iter().map(|(a, b)| OverlayEdge { from: a.clone(), to: b.clone(), directed: true }).collect());
    }
    out
}

/// The graph seeded from `backbone`'s edges. Each edge lists every algorithm
/// that found the same adjacency among its sources; edges the backbone left
/// undirected stay undirected.
pub fn backbone_graph(
    id: impl Into<String>,
    outcome: &str,
    snap: &DiscoverySnapshot,
    backbone: Algorithm,
) -> Result<CausalGraph, DiscoveryError> {
    let sets = overlays(snap);
    let Some(edges) = sets.get(&backbone) else {
        return Err(DiscoveryError::NotReady(backbone));
    };
    let mut graph_edges: Vec<GraphEdge> = edges
        .iter()
        .map(|e| {
            let mut g = if e.directed {
                GraphEdge::directed(e.from.clone(), e.to.clone(), source(backbone))
            } else {
                GraphEdge::undirected(e.from.clone(), e.to.clone(), source(backbone))
            };
            for (algo, other) in &sets {
                if other.iter().any(|o| unordered(&o.from, &o.to) == unordered(&e.from, &e.to)) {
                    g.sources.insert(source(*algo));
                }
            }
            g
        })
        .collect();
    graph_edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    CausalGraph::new(id, outcome, snap.variables.clone(), graph_edges).map_err(|e| DiscoveryError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{HybridResult, Pdag};
    use std::collections::BTreeSet;

    fn snap() -> DiscoverySnapshot {
        let mut s = DiscoverySnapshot::pending(vec!["A".into(), "B".into(), "C".into()], &[Algorithm::Pc, Algorithm::Hybrid]);
        s.pc = Some(Pdag {
            nodes: s.variables.clone(),
            directed: BTreeSet::from([("A".to_string(), "C".to_string())]),
            undirected: BTreeSet::from([("A".to_string(), "B".to_string())]),
        });
        s.hybrid = Some(HybridResult { edges: vec![("B".into(), "A".into())], diagnostics: Vec::new() });
        s
    }

    #[test]
    fn pc_backbone_keeps_undirected_edges_and_tags_sources() {
        let g = backbone_graph("g", "C", &snap(), Algorithm::Pc).unwrap();
        assert_eq!(g.edges.len(), 2);
        let ab = g.edges.iter().find(|e| e.connects("A", "B")).unwrap();
        assert!(!ab.directed);
        assert_eq!(ab.sources, BTreeSet::from([EdgeSource::Pc, EdgeSource::Hybrid]));
        assert!(g.edge("A", "C").unwrap().directed);
    }

    #[test]
    fn missing_backbone_is_not_ready() {
        assert_eq!(backbone_graph("g", "C", &snap(), Algorithm::Continuous).unwrap_err(), DiscoveryError::NotReady(Algorithm::Continuous));
        let h = backbone_graph("g", "C", &snap(), Algorithm::Hybrid).unwrap();
        assert_eq!(h.edges.len(), 1);
        assert!(h.edge("B", "A").unwrap().directed);
    }
}

//! Horizontal compression of per-outcome subgraphs around anchored shared
//! nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::layered::LayeredLayout;
use super::supergraph::{extract_subgraph, SuperLayout};
use super::{LayoutError, UNIT};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedLayout {
    /// Nodes owned by two or more graphs.
    pub anchored: Vec<String>,
    /// Distinct supergraph x of the anchored nodes with their compressed x.
    pub anchors: Vec<(f64, f64)>,
    pub subgraphs: BTreeMap<String, LayeredLayout>,
    /// `x' − x` per graph and node.
    pub delta: BTreeMap<String, BTreeMap<String, f64>>,
    /// No node is shared; every subgraph was packed on its own.
    pub fallback: bool,
}

fn distinct(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < EPS);
    xs
}

fn find(xs: &[f64], x: f64) -> Option<usize> {
    xs.iter().position(|v| (v - x).abs() < EPS)
}

/// Sorted `(x, x')` pairs for the anchor columns `cols` and the distinct x of
/// one subgraph's unique nodes. Outside the anchor span unique columns step by
/// one unit; between two anchors the `N` columns of that gap split it into
/// `N + 1` equal parts. A unique column sitting exactly on an anchor column
/// takes the anchor's value.
fn column_map(cols: &[f64], unique: &[f64]) -> Vec<(f64, f64)> {
    let out = |k: usize| cols[0] + k as f64 * UNIT;
    let mut map: Vec<(f64, f64)> = cols.iter().enumerate().map(|(k, &x)| (x, out(k))).collect();
    let last = cols.len() - 1;
    let free: Vec<f64> = unique.iter().copied().filter(|&u| find(cols, u).is_none()).collect();
    let left: Vec<f64> = free.iter().copied().filter(|&u| u < cols[0]).collect();
    for (m, &u) in left.iter().rev().enumerate() {
        map.push((u, out(0) - (m + 1) as f64 * UNIT));
    }
    let right: Vec<f64> = free.iter().copied().filter(|&u| u > cols[last]).collect();
    for (m, &u) in right.iter().enumerate() {
        map.push((u, out(last) + (m + 1) as f64 * UNIT));
    }
    for k in 0..last {
        let gap: Vec<f64> = free.iter().copied().filter(|&u| u > cols[k] && u < cols[k + 1]).collect();
        let step = UNIT / (gap.len() + 1) as f64;
        for (m, &u) in gap.iter().enumerate() {
            map.push((u, out(k) + (m + 1) as f64 * step));
        }
    }
    map.sort_by(|a, b| a.0.total_cmp(&b.0));
    map
}

/// Consecutive unit columns starting at the smallest x.
fn packed_map(xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().enumerate().map(|(k, &x)| (x, xs[0] + k as f64 * UNIT)).collect()
}

/// Piecewise-linear image of `x` under a sorted column map; slope one past
/// either end.
fn interpolate(map: &[(f64, f64)], x: f64) -> f64 {
    let i = map.partition_point(|p| p.0 < x - EPS);
    if i < map.len() && (map[i].0 - x).abs() < EPS {
        return map[i].1;
    }
    if i == 0 {
        return map[0].1 + (x - map[0].0);
    }
    if i == map.len() {
        return map[i - 1].1 + (x - map[i - 1].0);
    }
    let (a, b) = (map[i - 1], map[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

pub fn compress(s: &SuperLayout) -> Result<CompressedLayout, LayoutError> {
    let anchored: Vec<String> = s.membership.keys().filter(|n| s.is_shared(n)).cloned().collect();
    let cols = distinct(anchored.iter().map(|n| s.layout.nodes[n].x).collect());
    let fallback = cols.is_empty();
    let mut subgraphs = BTreeMap::new();
    let mut delta = BTreeMap::new();
    for id in &s.graph_ids {
        let mut sub = extract_subgraph(s, id)?;
        let map = if fallback {
            packed_map(&distinct(sub.nodes.values().map(|p| p.x).collect()))
        } else {
            let unique = distinct(sub.nodes.iter().filter(|(n, _)| !s.is_shared(n)).map(|(_, p)| p.x).collect());
            column_map(&cols, &unique)
        };
        let mut moved = BTreeMap::new();
        for (n, p) in sub.nodes.iter_mut() {
            let x = interpolate(&map, p.x);
            moved.insert(n.clone(), x - p.x);
            p.x = x;
        }
        for e in &mut sub.edges {
            for b in &mut e.bends {
                b.0 = interpolate(&map, b.0);
            }
        }
        sub.reorder();
        subgraphs.insert(id.clone(), sub);
        delta.insert(id.clone(), moved);
    }
    let anchors = cols.iter().enumerate().map(|(k, &x)| (x, cols[0] + k as f64 * UNIT)).collect();
    Ok(CompressedLayout { anchored, anchors, subgraphs, delta, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodePosition;
    use crate::layout::LaidEdge;

    fn at(rank: usize, x: f64) -> NodePosition {
        NodePosition { rank, order: 0, x, y: rank as f64 }
    }

    /// Two subgraphs over five shared nodes (S1–S5), three unique nodes in
    /// `a` and two in `b`, with coordinates fixed up front.
    fn fixture() -> SuperLayout {
        let nodes = [
            ("S1", 0, 1.0, "ab"),
            ("S2", 1, 4.0, "ab"),
            ("S3", 2, 4.0, "ab"),
            ("S4", 1, 9.0, "ab"),
            ("S5", 2, 12.0, "ab"),
            ("A", 1, 0.0, "a"),
            ("B", 1, 6.0, "a"),
            ("C", 2, 7.5, "a"),
            ("D", 2, 6.0, "b"),
            ("E", 1, 14.0, "b"),
        ];
        let mut layout = LayeredLayout::default();
        let mut membership = BTreeMap::new();
        for (n, r, x, owners) in nodes {
            layout.nodes.insert(n.to_string(), at(r, x));
            membership.insert(n.to_string(), owners.chars().map(|c| c.to_string()).collect());
        }
        layout.reorder();
        let edge = |a: &str, b: &str, owner: &str| super::super::SuperEdge {
            from: a.into(),
            to: b.into(),
            directed: true,
            owners: vec![owner.into()],
            reversed: false,
            bends: Vec::new(),
        };
        let edges = vec![edge("S1", "S2", "a"), edge("S1", "B", "a"), edge("B", "C", "a"), edge("S4", "D", "b"), edge("S1", "E", "b")];
        layout.edges = edges
            .iter()
            .map(|e| LaidEdge { from: e.from.clone(), to: e.to.clone(), directed: true, reversed: false, bends: Vec::new() })
            .collect();
        SuperLayout {
            graph_ids: vec!["a".into(), "b".into()],
            outcomes: BTreeMap::from([("a".into(), "C".into()), ("b".into(), "D".into())]),
            membership,
            edges,
            layout,
        }
    }

    #[test]
    fn golden_trace() {
        let c = compress(&fixture()).unwrap();
        assert!(!c.fallback);
        assert_eq!(c.anchors, vec![(1.0, 1.0), (4.0, 2.0), (9.0, 3.0), (12.0, 4.0)]);
        let xa = c.subgraphs["a"].x();
        let expect_a = [("A", 0.0), ("B", 2.0 + 1.0 / 3.0), ("C", 2.0 + 2.0 / 3.0), ("S1", 1.0), ("S2", 2.0), ("S3", 2.0), ("S4", 3.0), ("S5", 4.0)];
        for (n, x) in expect_a {
            assert!((xa[n] - x).abs() < 1e-12, "{n}: {} vs {x}", xa[n]);
        }
        let xb = c.subgraphs["b"].x();
        let expect_b = [("D", 2.5), ("E", 5.0), ("S1", 1.0), ("S2", 2.0), ("S3", 2.0), ("S4", 3.0), ("S5", 4.0)];
        for (n, x) in expect_b {
            assert!((xb[n] - x).abs() < 1e-12, "{n}: {} vs {x}", xb[n]);
        }
        assert!((c.delta["b"]["E"] - (5.0 - 14.0)).abs() < 1e-12);
    }

    #[test]
    fn anchors_start_at_first_column() {
        let map = column_map(&[2.5, 7.0, 11.0], &[]);
        assert_eq!(map, vec![(2.5, 2.5), (7.0, 3.5), (11.0, 4.5)]);
    }

    #[test]
    fn single_gap_node_sits_midway() {
        let map = column_map(&[0.0, 10.0], &[3.0]);
        assert_eq!(interpolate(&map, 3.0), 0.5);
    }

    #[test]
    fn no_shared_nodes_falls_back() {
        let mut s = fixture();
        for (n, m) in s.membership.iter_mut() {
            if n.starts_with('S') {
                m.truncate(1);
            }
        }
        let c = compress(&s).unwrap();
        assert!(c.fallback);
        assert!(c.anchored.is_empty());
        let xb = c.subgraphs["b"].x();
        assert_eq!(xb["D"], 6.0);
        assert_eq!(xb["E"], 7.0);
        let xa = c.subgraphs["a"].x();
        let mut vals: Vec<f64> = xa.values().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert_eq!(vals, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}

//! Sugiyama-style layered layout: longest-path ranks, dummy nodes on long
//! edges, barycenter ordering and a priority pass for grid x coordinates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{LayoutError, UNIT};
use crate::graph::{find_cycle, topological_order, CausalGraph, NodePosition};

const SWEEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaidEdge {
    pub from: String,
    pub to: String,
    #[serde(default = "yes")]
    pub directed: bool,
    /// The cause sits on a lower rank than the effect.
    pub reversed: bool,
    /// Waypoints through the intermediate ranks, listed from `from` to `to`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bends: Vec<(f64, f64)>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayeredLayout {
    pub nodes: BTreeMap<String, NodePosition>,
    pub edges: Vec<LaidEdge>,
}

impl LayeredLayout {
    pub fn x(&self) -> BTreeMap<String, f64> {
        self.nodes.iter().map(|(n, p)| (n.clone(), p.x)).collect()
    }

    /// Node names of every rank, left to right.
    pub fn rows(&self) -> Vec<Vec<String>> {
        let depth = self.nodes.values().map(|p| p.rank + 1).max().unwrap_or(0);
        let mut rows = vec![Vec::new(); depth];
        for (n, p) in &self.nodes {
            rows[p.rank].push((p.x, n.clone()));
        }
        rows.into_iter()
            .map(|mut r| {
                r.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                r.into_iter().map(|(_, n)| n).collect()
            })
            .collect()
    }

    /// Horizontal extent `(min, max)` over nodes and bends.
    pub fn x_range(&self) -> Option<(f64, f64)> {
        let xs = self.nodes.values().map(|p| p.x).chain(self.edges.iter().flat_map(|e| e.bends.iter().map(|b| b.0)));
        xs.fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((f64::min(lo, x), f64::max(hi, x))),
        })
    }

    /// Renumbers `order` from x within each rank.
    pub(crate) fn reorder(&mut self) {
        for row in self.rows() {
            for (i, n) in row.iter().enumerate() {
                self.nodes.get_mut(n).expect("row member").order = i;
            }
        }
    }
}

struct Layering {
    keys: Vec<String>,
    dummy: Vec<bool>,
    rank: Vec<usize>,
    ranks: Vec<Vec<usize>>,
    up: Vec<Vec<usize>>,
    down: Vec<Vec<usize>>,
    /// Per input edge, the node sequence from source through dummies to target.
    chains: Vec<Vec<usize>>,
}

impl Layering {
    /// `names` sorted, `edges` acyclic and indexing into `names`.
    fn new(names: &[String], edges: &[(usize, usize)]) -> Self {
        let n = names.len();
        let mut succ = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for &(a, b) in edges {
            succ[a].push(b);
            indeg[b] += 1;
        }
        let mut rank = vec![0usize; n];
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        while let Some(v) = ready.pop_first() {
            for &w in &succ[v] {
                rank[w] = rank[w].max(rank[v] + 1);
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        let mut keys = names.to_vec();
        let mut dummy = vec![false; n];
        let mut chains = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let mut chain = vec![a];
            for r in rank[a] + 1..rank[b] {
                keys.push(format!("{}\u{1f}{}\u{1f}{r}", names[a], names[b]));
                dummy.push(true);
                rank.push(r);
                chain.push(keys.len() - 1);
            }
            chain.push(b);
            chains.push(chain);
        }
        let total = keys.len();
        let mut up = vec![Vec::new(); total];
        let mut down = vec![Vec::new(); total];
        for chain in &chains {
            for w in chain.windows(2) {
                down[w[0]].push(w[1]);
                up[w[1]].push(w[0]);
            }
        }
        let depth = rank.iter().max().map_or(0, |r| r + 1);
        let mut ranks = vec![Vec::new(); depth];
        for v in 0..total {
            ranks[rank[v]].push(v);
        }
        let mut l = Layering { keys, dummy, rank, ranks, up, down, chains };
        l.ranks[0].sort_by(|&a, &b| l.keys[a].cmp(&l.keys[b]));
        for r in 1..depth {
            l.sort_rank(r, true);
        }
        l
    }

    fn positions(&self, r: usize) -> BTreeMap<usize, usize> {
        self.ranks[r].iter().enumerate().map(|(i, &v)| (v, i)).collect()
    }

    /// Sorts rank `r` by the barycenter of its neighbours above (or below),
    /// ties by key. Nodes without such neighbours keep their own index.
    fn sort_rank(&mut self, r: usize, above: bool) {
        let pos = self.positions(if above { r - 1 } else { r + 1 });
        let bary: BTreeMap<usize, f64> = self.ranks[r]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let nb = if above { &self.up[v] } else { &self.down[v] };
                let b = if nb.is_empty() {
                    i as f64
                } else {
                    nb.iter().map(|u| pos[u] as f64).sum::<f64>() / nb.len() as f64
                };
                (v, b)
            })
            .collect();
        let keys = &self.keys;
        self.ranks[r].sort_by(|a, b| bary[a].total_cmp(&bary[b]).then_with(|| keys[*a].cmp(&keys[*b])));
    }

    fn crossings(&self) -> usize {
        let mut total = 0;
        for r in 0..self.ranks.len().saturating_sub(1) {
            let below = self.positions(r + 1);
            let segs: Vec<(usize, usize)> = self.ranks[r]
                .iter()
                .enumerate()
                .flat_map(|(i, &v)| self.down[v].iter().map(move |w| (i, *w)))
                .map(|(i, w)| (i, below[&w]))
                .collect();
            for (k, a) in segs.iter().enumerate() {
                for b in &segs[k + 1..] {
                    if (a.0 < b.0 && a.1 > b.1) || (a.0 > b.0 && a.1 < b.1) {
                        total += 1;
                    }
                }
            }
        }
        total
    }

    /// Alternating down/up barycenter sweeps, keeping the best ordering seen.
    fn minimise(&mut self) {
        let depth = self.ranks.len();
        let mut best = self.ranks.clone();
        let mut best_count = self.crossings();
        for _ in 0..SWEEPS {
            if best_count == 0 {
                break;
            }
            for r in 1..depth {
                self.sort_rank(r, true);
            }
            for r in (0..depth.saturating_sub(1)).rev() {
                self.sort_rank(r, false);
            }
            let c = self.crossings();
            if c < best_count {
                best_count = c;
                best = self.ranks.clone();
            }
        }
        self.ranks = best;
    }

    /// Integer x per node: start from the order index, then pull nodes toward
    /// the rounded barycenter of their neighbours, highest priority first.
    /// Dummies outrank real nodes so long edges stay straight.
    fn assign_x(&self) -> Vec<i64> {
        let mut x = vec![0i64; self.keys.len()];
        for row in &self.ranks {
            for (i, &v) in row.iter().enumerate() {
                x[v] = i as i64;
            }
        }
        let depth = self.ranks.len();
        for above in [true, false, true] {
            let order: Vec<usize> = if above { (1..depth).collect() } else { (0..depth.saturating_sub(1)).rev().collect() };
            for r in order {
                self.place_rank(r, above, &mut x);
            }
        }
        let shift = x.iter().copied().min().unwrap_or(0);
        x.iter_mut().for_each(|v| *v -= shift);
        x
    }

    fn place_rank(&self, r: usize, above: bool, x: &mut [i64]) {
        let row = &self.ranks[r];
        let nb = |v: usize| if above { &self.up[v] } else { &self.down[v] };
        let priority = |v: usize| if self.dummy[v] { usize::MAX } else { nb(v).len() };
        let mut seq: Vec<usize> = (0..row.len()).collect();
        seq.sort_by(|&a, &b| priority(row[b]).cmp(&priority(row[a])).then(a.cmp(&b)));
        let mut placed = vec![false; row.len()];
        for &i in &seq {
            let v = row[i];
            let ns = nb(v);
            if !ns.is_empty() {
                let target = (ns.iter().map(|&u| x[u] as f64).sum::<f64>() / ns.len() as f64).round() as i64;
                if target > x[v] {
                    let mut p = target;
                    for j in i + 1..row.len() {
                        if placed[j] {
                            p = p.min(x[row[j]] - (j - i) as i64);
                        }
                    }
                    if p > x[v] {
                        x[v] = p;
                        for j in i + 1..row.len() {
                            x[row[j]] = x[row[j]].max(x[row[j - 1]] + 1);
                        }
                    }
                } else if target < x[v] {
                    let mut p = target;
                    for j in 0..i {
                        if placed[j] {
                            p = p.max(x[row[j]] + (i - j) as i64);
                        }
                    }
                    if p < x[v] {
                        x[v] = p;
                        for j in (0..i).rev() {
                            x[row[j]] = x[row[j]].min(x[row[j + 1]] - 1);
                        }
                    }
                }
            }
            placed[i] = true;
        }
    }
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], v: usize) -> usize {
        let mut root = v;
        while p[root] != root {
            root = p[root];
        }
        let mut cur = v;
        while p[cur] != root {
            let next = p[cur];
            p[cur] = root;
            cur = next;
        }
        root
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        groups.entry(root).or_default().push(v);
    }
    groups.into_values().collect()
}

fn validate(nodes: &[String], edges: &[(String, String)]) -> Result<(Vec<String>, Vec<(String, String)>), LayoutError> {
    if nodes.is_empty() {
        return Err(LayoutError::Empty);
    }
    let names: BTreeSet<&String> = nodes.iter().collect();
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    for (a, b) in edges {
        for end in [a, b] {
            if !names.contains(end) {
                return Err(LayoutError::UnknownNode(end.clone()));
            }
        }
        if a == b {
            return Err(LayoutError::SelfLoop(a.clone()));
        }
        if seen.insert((a, b)) {
            kept.push((a.clone(), b.clone()));
        }
    }
    let sorted: Vec<String> = names.into_iter().cloned().collect();
    if let Some(cycle) = find_cycle(&sorted, kept.iter().map(|(a, b)| (a.as_str(), b.as_str()))) {
        return Err(LayoutError::Cycle(cycle));
    }
    Ok((sorted, kept))
}

fn build(nodes: &[String], edges: &[(String, String)], sweep: bool) -> Result<LayeredLayout, LayoutError> {
    let (names, edges) = validate(nodes, edges)?;
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = edges.iter().map(|(a, b)| (index[a.as_str()], index[b.as_str()])).collect();
    let mut out = LayeredLayout::default();
    let mut bends: Vec<Vec<(f64, f64)>> = vec![Vec::new(); pairs.len()];
    let mut offset = 0i64;
    for comp in components(names.len(), &pairs) {
        let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let comp_edges: Vec<usize> = (0..pairs.len()).filter(|&k| local.contains_key(&pairs[k].0)).collect();
        let sub_names: Vec<String> = comp.iter().map(|&v| names[v].clone()).collect();
        let sub_pairs: Vec<(usize, usize)> = comp_edges.iter().map(|&k| (local[&pairs[k].0], local[&pairs[k].1])).collect();
        let mut layering = Layering::new(&sub_names, &sub_pairs);
        if sweep {
            layering.minimise();
        }
        let x = layering.assign_x();
        for (r, row) in layering.ranks.iter().enumerate() {
            let mut order = 0;
            for &v in row {
                if layering.dummy[v] {
                    continue;
                }
                let pos = NodePosition { rank: r, order, x: (x[v] + offset) as f64 * UNIT, y: r as f64 * UNIT };
                out.nodes.insert(sub_names[v].clone(), pos);
                order += 1;
            }
        }
        for (c, &k) in comp_edges.iter().enumerate() {
            let chain = &layering.chains[c];
            bends[k] = chain[1..chain.len() - 1]
                .iter()
                .map(|&d| ((x[d] + offset) as f64 * UNIT, layering.rank[d] as f64 * UNIT))
                .collect();
        }
        offset += x.iter().copied().max().unwrap_or(0) + 1;
    }
    // Component orders restart at zero.
    out.reorder();
    out.edges = edges
        .into_iter()
        .zip(bends)
        .map(|((from, to), bends)| LaidEdge { from, to, directed: true, reversed: false, bends })
        .collect();
    Ok(out)
}

/// Layered layout of a DAG. Sources sit on rank 0 and y grows with rank.
pub fn layered_layout(nodes: &[String], edges: &[(String, String)]) -> Result<LayeredLayout, LayoutError> {
    build(nodes, edges, true)
}

/// The same layout with the initial ordering, before any crossing reduction.
pub fn layered_layout_unswept(nodes: &[String], edges: &[(String, String)]) -> Result<LayeredLayout, LayoutError> {
    build(nodes, edges, false)
}

/// Edge crossings between consecutive ranks, following bends.
pub fn crossings(layout: &LayeredLayout) -> usize {
    let mut segs: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for e in &layout.edges {
        let (Some(a), Some(b)) = (layout.nodes.get(&e.from), layout.nodes.get(&e.to)) else {
            continue;
        };
        let mut pts: Vec<(f64, f64)> = vec![(a.x, a.y)];
        pts.extend(e.bends.iter().copied());
        pts.push((b.x, b.y));
        if a.y > b.y {
            pts.reverse();
        }
        for w in pts.windows(2) {
            segs.entry((w[0].1 / UNIT).round() as usize).or_default().push((w[0].0, w[1].0));
        }
    }
    let mut total = 0;
    for s in segs.values() {
        for (k, a) in s.iter().enumerate() {
            for b in &s[k + 1..] {
                if (a.0 - b.0) * (a.1 - b.1) < 0.0 {
                    total += 1;
                }
            }
        }
    }
    total
}

/// Directions used to rank a graph: directed edges as stored, undirected
/// edges oriented along a topological order of the directed part.
pub fn layering_edges(g: &CausalGraph) -> Vec<(String, String)> {
    let order = topological_order(&g.nodes, g.directed_pairs()).unwrap_or_else(|| g.nodes.clone());
    let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    g.edges
        .iter()
        .map(|e| {
            if e.directed || pos[e.from.as_str()] < pos[e.to.as_str()] {
                (e.from.clone(), e.to.clone())
            } else {
                (e.to.clone(), e.from.clone())
            }
        })
        .collect()
}

/// Layout of one causal graph with its edges listed in graph order.
pub fn layout_graph(g: &CausalGraph) -> Result<LayeredLayout, LayoutError> {
    let edges = layering_edges(g);
    let mut l = layered_layout(&g.nodes, &edges)?;
    let bends: BTreeMap<(String, String), Vec<(f64, f64)>> =
        l.edges.drain(..).map(|e| ((e.from, e.to), e.bends)).collect();
    l.edges = g
        .edges
        .iter()
        .zip(edges)
        .map(|(e, (from, to))| LaidEdge {
            bends: bends[&(from.clone(), to.clone())].clone(),
            from,
            to,
            directed: e.directed,
            reversed: false,
        })
        .collect();
    Ok(l)
}

/// Copies positions and reversed flags into the graph document.
pub fn attach_layout(g: &mut CausalGraph, layout: &LayeredLayout) {
    for e in &mut g.edges {
        let flag = match (layout.nodes.get(&e.from), layout.nodes.get(&e.to)) {
            (Some(a), Some(b)) if e.directed => Some(a.rank > b.rank),
            (Some(_), Some(_)) => Some(false),
            _ => None,
        };
        e.reversed = flag;
    }
    g.layout = Some(layout.nodes.clone());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSource, GraphEdge};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn e(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn single_edge() {
        let l = layered_layout(&s(&["A", "B"]), &e(&[("A", "B")])).unwrap();
        assert_eq!(l.nodes["A"].rank, 0);
        assert_eq!(l.nodes["B"].rank, 1);
        assert!(!l.edges[0].reversed);
        assert!(l.nodes["B"].y > l.nodes["A"].y);
    }

    #[test]
    fn diamond() {
        let l = layered_layout(&s(&["D", "C", "B", "A"]), &e(&[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")])).unwrap();
        let ranks: Vec<usize> = ["A", "B", "C", "D"].iter().map(|n| l.nodes[*n].rank).collect();
        assert_eq!(ranks, vec![0, 1, 1, 2]);
        assert_eq!(l.nodes["B"].order, 0);
        assert_eq!(l.nodes["C"].order, 1);
        assert!(l.nodes["B"].x < l.nodes["C"].x);
        assert_eq!(crossings(&l), 0);
    }

    #[test]
    fn long_edge_gets_bends() {
        let l = layered_layout(&s(&["A", "B", "C", "D"]), &e(&[("A", "B"), ("B", "C"), ("C", "D"), ("A", "D")])).unwrap();
        let long = l.edges.iter().find(|x| x.from == "A" && x.to == "D").unwrap();
        assert_eq!(long.bends.len(), 2);
        assert_eq!(long.bends[0].1, 1.0);
    }

    #[test]
    fn cycle_is_an_error() {
        let err = layered_layout(&s(&["A", "B"]), &e(&[("A", "B"), ("B", "A")])).unwrap_err();
        assert!(matches!(err, LayoutError::Cycle(_)));
        assert_eq!(layered_layout(&[], &[]).unwrap_err(), LayoutError::Empty);
    }

    #[test]
    fn components_side_by_side() {
        let l = layered_layout(&s(&["A", "B", "C", "D"]), &e(&[("A", "B"), ("C", "D")])).unwrap();
        assert!(l.nodes["A"].x.max(l.nodes["B"].x) < l.nodes["C"].x.min(l.nodes["D"].x));
        assert_eq!(l.nodes["C"].order, 1);
    }

    #[test]
    fn undirected_edges_follow_topological_order() {
        let g = CausalGraph::new(
            "g",
            "C",
            s(&["A", "B", "C"]),
            vec![GraphEdge::directed("A", "B", EdgeSource::Pc), GraphEdge::undirected("C", "B", EdgeSource::Pc)],
        )
        .unwrap();
        let l = layout_graph(&g).unwrap();
        assert_eq!(l.nodes["C"].rank, 2);
        assert_eq!((l.edges[1].from.as_str(), l.edges[1].to.as_str()), ("B", "C"));
        assert!(!l.edges[1].directed);
        let mut g2 = g.clone();
        attach_layout(&mut g2, &l);
        assert_eq!(g2.edges[0].reversed, Some(false));
        assert_eq!(g2.layout.unwrap()["C"].rank, 2);
    }
}

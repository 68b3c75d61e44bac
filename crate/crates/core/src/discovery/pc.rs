//! PC-stable skeleton search with collider orientation and Meek propagation.

use std::collections::{BTreeMap, BTreeSet};

use super::ci::ci_test;
use super::{DiscoveryError, Pdag};
use crate::dataset::MixedDataset;
use crate::graph::unordered;

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub nodes: Vec<String>,
    /// Unordered adjacencies, smaller name first.
    pub edges: BTreeSet<(String, String)>,
    /// Separating set that removed each pair.
    pub sepsets: BTreeMap<(String, String), Vec<String>>,
}

impl Skeleton {
    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.edges.contains(&unordered(a, b))
    }

    pub fn neighbours(&self, v: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }
}

fn resolve(ds: &MixedDataset, vars: &[String]) -> Result<Vec<(String, usize)>, DiscoveryError> {
    if vars.len() < 2 {
        return Err(DiscoveryError::TooFewVariables);
    }
    let mut out = Vec::with_capacity(vars.len());
    for v in vars {
        out.push((v.clone(), ds.require(v)?));
    }
    let uniq: BTreeSet<&String> = vars.iter().collect();
    if uniq.len() != vars.len() {
        return Err(DiscoveryError::Config("duplicate variable".into()));
    }
    Ok(out)
}

/// Lexicographic k-subsets of `items`.
pub(crate) fn combinations<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < p + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Level-wise edge removal with adjacency sets frozen at the start of each
/// level. Pairs and conditioning sets are visited in name order.
pub fn pc_skeleton(ds: &MixedDataset, vars: &[String], alpha: f64) -> Result<Skeleton, DiscoveryError> {
    let mut sorted = vars.to_vec();
    sorted.sort();
    pc_skeleton_in_order(ds, &sorted, alpha)
}

/// Same search, visiting variables in the given order.
pub fn pc_skeleton_in_order(ds: &MixedDataset, vars: &[String], alpha: f64) -> Result<Skeleton, DiscoveryError> {
    let resolved = resolve(ds, vars)?;
    let index: BTreeMap<&str, usize> = resolved.iter().map(|(n, i)| (n.as_str(), *i)).collect();
    let mut edges = BTreeSet::new();
    for a in 0..vars.len() {
        for b in a + 1..vars.len() {
            edges.insert(unordered(&vars[a], &vars[b]));
        }
    }
    let mut skel = Skeleton { nodes: vars.to_vec(), edges, sepsets: BTreeMap::new() };
    let mut level = 0usize;
    loop {
        let frozen: BTreeMap<String, Vec<String>> = vars
            .iter()
            .map(|v| {
                let mut nb = skel.neighbours(v);
                nb.sort_by_key(|n| vars.iter().position(|x| x == n));
                (v.clone(), nb)
            })
            .collect();
        if frozen.values().all(|nb| nb.len() <= level) {
            break;
        }
        for x in vars {
            for y in &frozen[x] {
                if !skel.adjacent(x, y) {
                    continue;
                }
                let cond: Vec<String> = frozen[x].iter().filter(|v| *v != y).cloned().collect();
                if cond.len() < level {
                    continue;
                }
                for subset in combinations(&cond, level) {
                    let s: Vec<usize> = subset.iter().map(|v| index[v.as_str()]).collect();
                    let res = ci_test(ds, index[x.as_str()], index[y.as_str()], &s)?;
                    if res.p_value > alpha {
                        let key = unordered(x, y);
                        skel.edges.remove(&key);
                        let mut sep = subset.clone();
                        sep.sort();
                        skel.sepsets.insert(key, sep);
                        break;
                    }
                }
            }
        }
        level += 1;
    }
    Ok(skel)
}

/// Mutable PDAG used during orientation.
struct Orienter {
    nodes: Vec<String>,
    directed: BTreeSet<(String, String)>,
    undirected: BTreeSet<(String, String)>,
}

impl Orienter {
    fn adjacent(&self, a: &str, b: &str) -> bool {
        self.undirected.contains(&unordered(a, b))
            || self.directed.contains(&(a.to_string(), b.to_string()))
            || self.directed.contains(&(b.to_string(), a.to_string()))
    }

    fn is_undirected(&self, a: &str, b: &str) -> bool {
        self.undirected.contains(&unordered(a, b))
    }

    fn is_directed(&self, a: &str, b: &str) -> bool {
        self.directed.contains(&(a.to_string(), b.to_string()))
    }

    fn creates_cycle(&self, a: &str, b: &str) -> bool {
        crate::graph::directed_path(self.directed.iter().map(|(x, y)| (x.as_str(), y.as_str())), b, a).is_some()
    }

    /// Orients an undirected `a − b` as `a → b` unless that closes a cycle.
    fn orient(&mut self, a: &str, b: &str) -> bool {
        if !self.is_undirected(a, b) || self.creates_cycle(a, b) {
            return false;
        }
        self.undirected.remove(&unordered(a, b));
        self.directed.insert((a.to_string(), b.to_string()));
        true
    }

    fn meek(&mut self) {
        loop {
            let mut changed = false;
            let undirected: Vec<(String, String)> = self.undirected.iter().cloned().collect();
            for (u, v) in undirected {
                for (a, b) in [(u.clone(), v.clone()), (v.clone(), u.clone())] {
                    if !self.is_undirected(&a, &b) {
                        continue;
                    }
                    if self.rule1(&a, &b) || self.rule2(&a, &b) || self.rule3(&a, &b) {
                        changed |= self.orient(&a, &b);
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// c → a − b with c, b nonadjacent.
    fn rule1(&self, a: &str, b: &str) -> bool {
        self.nodes.iter().any(|c| c != b && self.is_directed(c, a) && !self.adjacent(c, b))
    }

    /// a → c → b with a − b.
    fn rule2(&self, a: &str, b: &str) -> bool {
        self.nodes.iter().any(|c| self.is_directed(a, c) && self.is_directed(c, b))
    }

    /// a − c1 → b and a − c2 → b with c1, c2 nonadjacent.
    fn rule3(&self, a: &str, b: &str) -> bool {
        let cs: Vec<&String> = self
            .nodes
            .iter()
            .filter(|c| self.is_undirected(a, c) && self.is_directed(c, b))
            .collect();
        for (k, c1) in cs.iter().enumerate() {
            for c2 in &cs[k + 1..] {
                if !self.adjacent(c1, c2) {
                    return true;
                }
            }
        }
        false
    }
}

/// Orients a skeleton: colliders from separating sets, then Meek rules 1–3
/// until nothing changes. Conflicting or cycle-closing orientations are skipped.
pub(crate) fn orient(skel: &Skeleton) -> Pdag {
    let mut nodes = skel.nodes.clone();
    nodes.sort();
    let mut o = Orienter { nodes: nodes.clone(), directed: BTreeSet::new(), undirected: skel.edges.clone() };
    for z in &nodes {
        let mut nb = skel.neighbours(z);
        nb.sort();
        for (k, x) in nb.iter().enumerate() {
            for y in &nb[k + 1..] {
                if skel.adjacent(x, y) {
                    continue;
                }
                let sep = skel.sepsets.get(&unordered(x, y));
                if sep.is_some_and(|s| s.contains(z)) {
                    continue;
                }
                let ok_x = o.is_directed(x, z) || (o.is_undirected(x, z) && !o.creates_cycle(x, z));
                let ok_y = o.is_directed(y, z) || (o.is_undirected(y, z) && !o.creates_cycle(y, z));
                if ok_x && ok_y {
                    o.orient(x, z);
                    o.orient(y, z);
                }
            }
        }
    }
    o.meek();
    Pdag { nodes, directed: o.directed, undirected: o.undirected }
}

pub fn run_pc(ds: &MixedDataset, vars: &[String], alpha: f64) -> Result<Pdag, DiscoveryError> {
    let skel = pc_skeleton(ds, vars, alpha)?;
    Ok(orient(&skel))
}

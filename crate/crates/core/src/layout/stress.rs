use std::collections::{BTreeMap, VecDeque};

use super::layered::LayeredLayout;
use super::UNIT;

/// Horizontal stress: sum over connected pairs of
/// `d⁻² (|x_i − x_j| − unit·d)²` with `d` the undirected hop distance.
/// Edges touching nodes without a coordinate are ignored.
pub fn stress_x(x: &BTreeMap<String, f64>, edges: &[(String, String)], unit: f64) -> f64 {
    let names: Vec<&String> = x.keys().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut adj = vec![Vec::new(); names.len()];
    for (a, b) in edges {
        if let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut total = 0.0;
    let mut dist = vec![usize::MAX; names.len()];
    for s in 0..names.len() {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        for t in s + 1..names.len() {
            if dist[t] == usize::MAX {
                continue;
            }
            let d = dist[t] as f64;
            let gap = (x[names[s]] - x[names[t]]).abs() - unit * d;
            total += gap * gap / (d * d);
        }
    }
    total
}

pub fn stress_of(layout: &LayeredLayout) -> f64 {
    let edges: Vec<(String, String)> = layout.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
    stress_x(&layout.x(), &edges, UNIT)
}

//! Seeded synthetic structural equation models with known ground truth.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{MixedDataset, VariableSpec};
use crate::graph::{CausalGraph, EdgeSource, GraphEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Chain,
    Fork,
    Collider,
    MixedSem,
    BinaryTreatment,
    Confounder,
    LinearSem5,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "chain" => SynthKind::Chain,
            "fork" => SynthKind::Fork,
            "collider" => SynthKind::Collider,
            "mixed-sem" => SynthKind::MixedSem,
            "binary-treatment" => SynthKind::BinaryTreatment,
            "confounder" => SynthKind::Confounder,
            "linear-sem5" => SynthKind::LinearSem5,
            other => return Err(format!("unknown synthetic kind {other:?}")),
        })
    }
}

/// A sample together with the graph that generated it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: MixedDataset,
    pub truth: Vec<(String, String)>,
    /// Coefficient of each true edge, where the edge is linear.
    pub coefficients: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn binary_spec(name: &str) -> VariableSpec {
    VariableSpec::categorical(name, vec!["0".into(), "1".into()])
}

fn pairs(edges: &[(&str, &str)]) -> Vec<(String, String)> {
    edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn continuous(names: &[&str], columns: Vec<Vec<f64>>) -> MixedDataset {
    MixedDataset::from_columns(names.iter().map(|n| VariableSpec::continuous(*n)).collect(), columns).expect("valid synthetic data")
}

pub fn generate(kind: SynthKind, n: usize, seed: u64) -> Synthetic {
    match kind {
        SynthKind::Chain => chain(n, seed),
        SynthKind::Fork => fork(n, seed),
        SynthKind::Collider => collider(n, seed),
        SynthKind::MixedSem => mixed_sem(n, seed),
        SynthKind::BinaryTreatment => binary_treatment(n, seed),
        SynthKind::Confounder => confounder(n, seed),
        SynthKind::LinearSem5 => linear_sem5(n, seed),
    }
}

/// X → Y → Z with unit coefficients.
pub fn chain(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let x = normal(&mut rng);
        let y = x + normal(&mut rng);
        let z = y + normal(&mut rng);
        cols[0].push(x);
        cols[1].push(y);
        cols[2].push(z);
    }
    Synthetic { data: continuous(&["X", "Y", "Z"], cols), truth: pairs(&[("X", "Y"), ("Y", "Z")]), coefficients: vec![1.0, 1.0] }
}

/// X ← Y → Z with unit coefficients.
pub fn fork(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let y = normal(&mut rng);
        let x = y + normal(&mut rng);
        let z = y + normal(&mut rng);
        cols[0].push(x);
        cols[1].push(y);
        cols[2].push(z);
    }
    Synthetic { data: continuous(&["X", "Y", "Z"], cols), truth: pairs(&[("Y", "X"), ("Y", "Z")]), coefficients: vec![1.0, 1.0] }
}

/// X → Z ← Y with unit coefficients.
pub fn collider(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let x = normal(&mut rng);
        let y = normal(&mut rng);
        let z = x + y + normal(&mut rng);
        cols[0].push(x);
        cols[1].push(y);
        cols[2].push(z);
    }
    Synthetic { data: continuous(&["X", "Y", "Z"], cols), truth: pairs(&[("X", "Z"), ("Y", "Z")]), coefficients: vec![1.0, 1.0] }
}

/// Binary T with Y = 1.5·T + ε.
pub fn binary_treatment(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let ti = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        t.push(ti);
        y.push(1.5 * ti + normal(&mut rng));
    }
    let data = MixedDataset::from_columns(vec![binary_spec("T"), VariableSpec::continuous("Y")], vec![t, y]).expect("valid");
    Synthetic { data, truth: pairs(&[("T", "Y")]), coefficients: vec![1.5] }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mixed model: binary T and continuous X cause Y; Y drives a binary S and a
/// three-level K.
pub fn mixed_sem(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 5];
    for _ in 0..n {
        let t = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let x = normal(&mut rng);
        let y = 1.5 * t + 0.8 * x + normal(&mut rng);
        let s = if rng.random_bool(sigmoid(1.5 * (y - 0.75))) { 1.0 } else { 0.0 };
        let k = {
            let eta = 1.2 * (y - 0.75);
            let w = [1.0, (eta).exp(), (2.0 * eta).exp()];
            let u: f64 = rng.random::<f64>() * w.iter().sum::<f64>();
            if u < w[0] {
                0.0
            } else if u < w[0] + w[1] {
                1.0
            } else {
                2.0
            }
        };
        for (c, v) in cols.iter_mut().zip([t, x, y, s, k]) {
            c.push(v);
        }
    }
    let vars = vec![
        binary_spec("T"),
        VariableSpec::continuous("X"),
        VariableSpec::continuous("Y"),
        binary_spec("S"),
        VariableSpec::categorical("K", vec!["0".into(), "1".into(), "2".into()]),
    ];
    let data = MixedDataset::from_columns(vars, cols).expect("valid");
    Synthetic { data, truth: pairs(&[("T", "Y"), ("X", "Y"), ("Y", "S"), ("Y", "K")]), coefficients: vec![1.5, 0.8, 1.5, 1.2] }
}

/// Z → X → Y with Z → Y: X = Z + e, Y = 2X + 0.5Z + ε.
pub fn confounder(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 3];
    for _ in 0..n {
        let z = normal(&mut rng);
        let x = z + normal(&mut rng);
        let y = 2.0 * x + 0.5 * z + normal(&mut rng);
        cols[0].push(x);
        cols[1].push(y);
        cols[2].push(z);
    }
    Synthetic {
        data: continuous(&["X", "Y", "Z"], cols),
        truth: pairs(&[("Z", "X"), ("X", "Y"), ("Z", "Y")]),
        coefficients: vec![1.0, 2.0, 0.5],
    }
}

/// Coefficient with magnitude uniform in [0.8, 2.0] and random sign.
fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(0.8..=2.0);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Five-node linear Gaussian SEM on a fixed diamond-and-tail DAG with
/// seeded coefficients.
pub fn linear_sem5(n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = [(0usize, 1usize), (0, 2), (1, 3), (2, 3), (3, 4)];
    let coefs: Vec<f64> = edges.iter().map(|_| coefficient(&mut rng)).collect();
    let names = ["V1", "V2", "V3", "V4", "V5"];
    let mut cols = vec![vec![0.0; n]; 5];
    for r in 0..n {
        for v in 0..5 {
            let mut x = normal(&mut rng);
            for (e, &(a, b)) in edges.iter().enumerate() {
                if b == v {
                    x += coefs[e] * cols[a][r];
                }
            }
            cols[v][r] = x;
        }
    }
    let truth = edges.iter().map(|&(a, b)| (names[a].to_string(), names[b].to_string())).collect();
    Synthetic { data: continuous(&names, cols), truth, coefficients: coefs }
}

/// Random mixed-type SEM over `d` variables: a random DAG with edge
/// probability `p`, roughly a third of the variables binary and the rest
/// linear Gaussian.
pub fn random_mixed_sem(d: usize, p: f64, n: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let names: Vec<String> = (0..d).map(|i| format!("V{}", i + 1)).collect();
    let binary: Vec<bool> = (0..d).map(|_| rng.random_bool(1.0 / 3.0)).collect();
    let mut edges = Vec::new();
    let mut coefs = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            if rng.random_bool(p) {
                edges.push((order[a], order[b]));
                coefs.push(coefficient(&mut rng));
            }
        }
    }
    let mut cols = vec![vec![0.0; n]; d];
    for r in 0..n {
        for &v in &order {
            let mut eta = 0.0;
            for (e, &(a, b)) in edges.iter().enumerate() {
                if b == v {
                    let parent = if binary[a] { 2.0 * cols[a][r] - 1.0 } else { cols[a][r] };
                    eta += coefs[e] * parent;
                }
            }
            cols[v][r] = if binary[v] {
                if rng.random_bool(sigmoid(2.0 * eta)) { 1.0 } else { 0.0 }
            } else {
                eta + normal(&mut rng)
            };
        }
    }
    for v in 0..d {
        if binary[v] {
            let ones = cols[v].iter().filter(|&&x| x == 1.0).count();
            if ones == 0 || ones == n {
                cols[v][0] = 1.0 - cols[v][0];
            }
        }
    }
    let specs = (0..d).map(|v| if binary[v] { binary_spec(&names[v]) } else { VariableSpec::continuous(names[v].clone()) }).collect();
    let data = MixedDataset::from_columns(specs, cols).expect("valid");
    let truth = edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect();
    Synthetic { data, truth, coefficients: coefs }
}

/// Random DAGs for one multi-outcome comparison: `graphs` outcome graphs
/// drawn over a common pool so that a share of nodes recurs across graphs.
pub fn outcome_graphs(seed: u64, graphs: usize, min_nodes: usize, max_nodes: usize, shared_fraction: f64) -> Vec<CausalGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_size = max_nodes * 2;
    let pool: Vec<String> = (0..pool_size).map(|i| format!("v{i:02}")).collect();
    let shared_count = ((max_nodes as f64) * shared_fraction).round().max(1.0) as usize;
    let shared: Vec<String> = pool[..shared_count].to_vec();
    let mut next_unique = 0usize;
    let mut position: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    let mut out = Vec::with_capacity(graphs);
    for g in 0..graphs {
        let size = rng.random_range(min_nodes..=max_nodes);
        let k = ((size as f64 * shared_fraction).round() as usize).clamp(1, shared.len().min(size));
        let mut nodes: Vec<String> = {
            let mut s = shared.clone();
            s.shuffle(&mut rng);
            s.truncate(k);
            s
        };
        while nodes.len() < size {
            nodes.push(format!("u{g}_{next_unique:02}"));
            next_unique += 1;
        }
        // One causal order over all graphs keeps the union acyclic.
        for name in &nodes {
            if !position.contains_key(name) {
                position.insert(name.clone(), rng.random());
            }
        }
        nodes.sort_by(|a, b| position[a].total_cmp(&position[b]));
        let mut edges = BTreeSet::new();
        for j in 1..nodes.len() {
            let i = rng.random_range(0..j);
            edges.insert((i, j));
            for i2 in 0..j {
                if i2 != i && rng.random_bool(0.15) {
                    edges.insert((i2, j));
                }
            }
        }
        let edge_list = edges
            .into_iter()
            .map(|(a, b)| GraphEdge::directed(nodes[a].clone(), nodes[b].clone(), EdgeSource::User))
            .collect();
        let outcome = nodes.last().expect("non-empty").clone();
        let mut sorted = nodes.clone();
        sorted.sort();
        out.push(CausalGraph::new(format!("g{g}"), outcome, sorted, edge_list).expect("generated DAG is valid"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = linear_sem5(50, 3);
        let b = linear_sem5(50, 3);
        assert_eq!(a.data, b.data);
        assert_eq!(a.coefficients, b.coefficients);
        assert!(a.coefficients.iter().all(|c| (0.8..=2.0).contains(&c.abs())));
    }

    #[test]
    fn outcome_graphs_share_nodes() {
        let gs = outcome_graphs(5, 3, 5, 10, 0.5);
        assert_eq!(gs.len(), 3);
        let common: BTreeSet<&String> = gs[0].nodes.iter().filter(|n| gs[1..].iter().any(|g| g.nodes.contains(n))).collect();
        assert!(!common.is_empty());
        for g in &gs {
            assert!((5..=10).contains(&g.nodes.len()));
        }
    }

    #[test]
    fn mixed_sem_types() {
        let s = mixed_sem(200, 1);
        assert!(s.data.variables()[0].is_categorical());
        assert_eq!(s.data.variables()[4].cardinality(), 3);
    }
}

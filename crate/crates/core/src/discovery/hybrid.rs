//! Hybrid learner: PC-stable skeleton, greedy score-based orientation under a
//! penalised mixed likelihood, then CI pruning.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ci::ci_test;
use super::pc::{orient, pc_skeleton};
use super::{DiscoveryError, HybridConfig};
use crate::dataset::{design_matrix, encode_column, MixedDataset, VariableKind};
use crate::graph::{directed_path, topological_order, unordered};
use crate::stats;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub edges: Vec<(String, String)>,
    /// Candidates that were skipped because a fit failed.
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

struct Scorer<'a> {
    ds: &'a MixedDataset,
    index: BTreeMap<String, usize>,
    penalty: f64,
    cache: BTreeMap<(String, Vec<String>), Option<f64>>,
    diagnostics: BTreeSet<String>,
}

impl Scorer<'_> {
    /// Penalised log-likelihood of `node` given `parents`; `None` when the
    /// fit fails.
    fn local(&mut self, node: &str, parents: &BTreeSet<String>) -> Option<f64> {
        let key = (node.to_string(), parents.iter().cloned().collect::<Vec<_>>());
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let v = self.fit(node, parents);
        if v.is_none() {
            let ps: Vec<&str> = parents.iter().map(String::as_str).collect();
            self.diagnostics.insert(format!("fit of {node} on [{}] failed; candidate skipped", ps.join(", ")));
        }
        self.cache.insert(key, v);
        v
    }

    fn fit(&self, node: &str, parents: &BTreeSet<String>) -> Option<f64> {
        let ds = self.ds;
        let n = ds.row_count();
        let idx = self.index[node];
        let cols: Vec<Vec<f64>> = parents.iter().flat_map(|p| encode_column(ds, self.index[p])).map(|(_, c)| c).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let x = stats::drop_dependent(&design_matrix(n, &refs));
        match ds.variable(idx).kind {
            VariableKind::Continuous => {
                let y = DVector::from_column_slice(ds.column(idx));
                let fit = stats::ols(&x, &y).ok()?;
                Some(fit.log_likelihood() - self.penalty * (x.ncols() + 1) as f64)
            }
            VariableKind::Categorical => {
                let classes = ds.variable(idx).cardinality();
                let y = ds.codes(idx);
                let ll = if parents.is_empty() {
                    stats::multinomial_null_ll(&y, classes)
                } else {
                    stats::multinomial_logit(&x, &y, classes).ok()?.log_likelihood
                };
                Some(ll - self.penalty * ((classes - 1) * x.ncols()) as f64)
            }
        }
    }
}

type Dag = BTreeSet<(String, String)>;

fn parents_of(dag: &Dag, node: &str) -> BTreeSet<String> {
    dag.iter().filter(|(_, c)| c == node).map(|(p, _)| p.clone()).collect()
}

fn acyclic_with(dag: &Dag, from: &str, to: &str) -> bool {
    directed_path(dag.iter().map(|(a, b)| (a.as_str(), b.as_str())), to, from).is_none()
}

fn total_score(sc: &mut Scorer, nodes: &[String], dag: &Dag) -> Option<f64> {
    nodes.iter().map(|v| sc.local(v, &parents_of(dag, v))).sum()
}

/// Gain of moving `node` from its current parents to `new_parents`.
fn delta(sc: &mut Scorer, dag: &Dag, node: &str, new_parents: BTreeSet<String>) -> Option<f64> {
    let old = sc.local(node, &parents_of(dag, node))?;
    Some(sc.local(node, &new_parents)? - old)
}

/// Hill climbing over additions and reversals of skeleton edges.
fn climb(sc: &mut Scorer, skeleton: &BTreeSet<(String, String)>, mut dag: Dag) -> Dag {
    loop {
        let mut best: Option<(f64, Dag)> = None;
        for (a, b) in skeleton {
            let fwd = (a.clone(), b.clone());
            let bwd = (b.clone(), a.clone());
            let candidates: Vec<((String, String), Option<(String, String)>)> = if dag.contains(&fwd) {
                vec![(bwd.clone(), Some(fwd.clone()))]
            } else if dag.contains(&bwd) {
                vec![(fwd.clone(), Some(bwd.clone()))]
            } else {
                vec![(fwd.clone(), None), (bwd.clone(), None)]
            };
            for ((from, to), removed) in candidates {
                let mut base = dag.clone();
                if let Some(r) = &removed {
                    base.remove(r);
                }
                if !acyclic_with(&base, &from, &to) {
                    continue;
                }
                let mut gain = {
                    let mut np = parents_of(&base, &to);
                    np.insert(from.clone());
                    match delta(sc, &dag, &to, np) {
                        Some(g) => g,
                        None => continue,
                    }
                };
                if removed.is_some() {
                    let np = parents_of(&base, &from);
                    match delta(sc, &dag, &from, np) {
                        Some(g) => gain += g,
                        None => continue,
                    }
                }
                if gain > 1e-9 && best.as_ref().map_or(true, |(g, _)| gain > *g) {
                    base.insert((from, to));
                    best = Some((gain, base));
                }
            }
        }
        match best {
            Some((_, next)) => dag = next,
            None => return dag,
        }
    }
}

/// Extends a PDAG to a DAG by orienting undirected edges along a
/// topological order of its directed part.
fn extend(nodes: &[String], directed: &Dag, undirected: &BTreeSet<(String, String)>) -> Dag {
    let order = topological_order(nodes, directed.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap_or_else(|| nodes.to_vec());
    let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut dag = directed.clone();
    for (a, b) in undirected {
        if pos[a.as_str()] < pos[b.as_str()] {
            dag.insert((a.clone(), b.clone()));
        } else {
            dag.insert((b.clone(), a.clone()));
        }
    }
    dag
}

pub fn run_hybrid(ds: &MixedDataset, vars: &[String], alpha: f64, config: &HybridConfig) -> Result<HybridResult, DiscoveryError> {
    let skel = pc_skeleton(ds, vars, alpha)?;
    let n = ds.row_count() as f64;
    let mut sc = Scorer {
        ds,
        index: vars.iter().map(|v| ds.require(v).map(|i| (v.clone(), i))).collect::<Result<_, _>>()?,
        penalty: config.penalty.unwrap_or(n.ln() / 2.0),
        cache: BTreeMap::new(),
        diagnostics: BTreeSet::new(),
    };
    let nodes = skel.nodes.clone();
    let from_empty = climb(&mut sc, &skel.edges, Dag::new());
    let seeded = {
        let pdag = orient(&skel);
        climb(&mut sc, &skel.edges, extend(&nodes, &pdag.directed, &pdag.undirected))
    };
    let s_empty = total_score(&mut sc, &nodes, &from_empty);
    let s_seeded = total_score(&mut sc, &nodes, &seeded);
    let dag = match (s_empty, s_seeded) {
        (Some(e), Some(s)) if e > s + 1e-9 => from_empty,
        (Some(_), None) => from_empty,
        _ => seeded,
    };
    let index = sc.index.clone();
    let mut edges = Vec::new();
    for (p, c) in &dag {
        let others: Vec<usize> = parents_of(&dag, c).iter().filter(|q| *q != p).map(|q| index[q]).collect();
        let res = ci_test(ds, index[p], index[c], &others)?;
        if res.p_value <= alpha {
            edges.push((p.clone(), c.clone()));
        }
    }
    debug_assert!(edges.iter().all(|(a, b)| skel.edges.contains(&unordered(a, b))));
    Ok(HybridResult { edges, diagnostics: sc.diagnostics.into_iter().collect() })
}

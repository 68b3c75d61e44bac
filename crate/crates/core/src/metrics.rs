//! Skeleton accuracy, false-positive rate and structural Hamming distance of
//! predicted edge sets against a known DAG.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::Pdag;
use crate::graph::unordered;

/// A predicted partially directed graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedEdges {
    #[serde(default)]
    pub directed: BTreeSet<(String, String)>,
    #[serde(default)]
    pub undirected: BTreeSet<(String, String)>,
}

impl PredictedEdges {
    pub fn directed(edges: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { directed: edges.into_iter().collect(), undirected: BTreeSet::new() }
    }

    pub fn skeleton(&self) -> BTreeSet<(String, String)> {
        self.directed.iter().chain(&self.undirected).map(|(a, b)| unordered(a, b)).collect()
    }

    /// Orientation per unordered pair; `None` for undirected.
    fn marks(&self) -> BTreeMap<(String, String), Option<(String, String)>> {
        let mut out = BTreeMap::new();
        for (a, b) in &self.undirected {
            out.insert(unordered(a, b), None);
        }
        for (a, b) in &self.directed {
            let key = unordered(a, b);
            match out.get(&key) {
                // Both directions, or directed and undirected: no orientation.
                Some(_) => {
                    out.insert(key, None);
                }
                None => {
                    out.insert(key, Some((a.clone(), b.clone())));
                }
            }
        }
        out
    }
}

impl From<&Pdag> for PredictedEdges {
    fn from(p: &Pdag) -> Self {
        Self { directed: p.directed.clone(), undirected: p.undirected.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub accuracy: f64,
    pub fpr: f64,
    pub hamming: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// One row per prediction, then a `union` row when there are several.
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn row(&self, name: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("edge endpoint {0:?} is not among the nodes")]
    UnknownNode(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("nothing to evaluate")]
    NoPrediction,
}

/// Union of predictions: an edge keeps a direction only when every
/// prediction containing it agrees on it.
pub fn union(preds: &[&PredictedEdges]) -> PredictedEdges {
    let mut marks: BTreeMap<(String, String), Option<(String, String)>> = BTreeMap::new();
    for p in preds {
        for (key, m) in p.marks() {
            match marks.get(&key) {
                Some(prev) if *prev != m => {
                    marks.insert(key, None);
                }
                Some(_) => {}
                None => {
                    marks.insert(key, m);
                }
            }
        }
    }
    let mut out = PredictedEdges::default();
    for (key, m) in marks {
        match m {
            Some(d) => out.directed.insert(d),
            None => out.undirected.insert(key),
        };
    }
    out
}

fn row(name: &str, pred: &PredictedEdges, truth: &BTreeSet<(String, String)>, pairs: usize) -> MetricRow {
    let true_skel: BTreeSet<(String, String)> = truth.iter().map(|(a, b)| unordered(a, b)).collect();
    let pred_skel = pred.skeleton();
    let hits = pred_skel.intersection(&true_skel).count();
    let extra = pred_skel.difference(&true_skel).count();
    let accuracy = if true_skel.is_empty() { 1.0 } else { hits as f64 / true_skel.len() as f64 };
    let non_edges = pairs - true_skel.len();
    let fpr = if non_edges == 0 { 0.0 } else { extra as f64 / non_edges as f64 };
    let marks = pred.marks();
    let mut hamming = extra + true_skel.difference(&pred_skel).count();
    for (a, b) in truth {
        if let Some(Some((p, _))) = marks.get(&unordered(a, b)) {
            if p != a {
                hamming += 1;
            }
        }
    }
    MetricRow { name: name.to_string(), accuracy, fpr, hamming }
}

fn check(nodes: &BTreeSet<&str>, edges: impl IntoIterator<Item = (String, String)>) -> Result<(), MetricError> {
    for (a, b) in edges {
        for end in [&a, &b] {
            if !nodes.contains(end.as_str()) {
                return Err(MetricError::UnknownNode(end.clone()));
            }
        }
        if a == b {
            return Err(MetricError::SelfLoop(a));
        }
    }
    Ok(())
}

/// Scores each named prediction against the true DAG over `nodes`. An
/// undirected prediction of a true edge costs nothing in Hamming distance; a
/// reversed one costs one.
pub fn eval_metrics(
    nodes: &[String],
    preds: &[(String, PredictedEdges)],
    truth: &BTreeSet<(String, String)>,
) -> Result<MetricReport, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::NoPrediction);
    }
    let names: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
    check(&names, truth.iter().cloned())?;
    for (_, p) in preds {
        check(&names, p.directed.iter().chain(&p.undirected).cloned())?;
    }
    let n = names.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut rows: Vec<MetricRow> = preds.iter().map(|(name, p)| row(name, p, truth, pairs)).collect();
    if preds.len() > 1 {
        let all: Vec<&PredictedEdges> = preds.iter().map(|(_, p)| p).collect();
        rows.push(row("union", &union(&all), truth, pairs));
    }
    Ok(MetricReport { rows })
}

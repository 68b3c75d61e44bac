//! Signed per-edge causal effects: backdoor adjustment by the treatment's
//! parents followed by least squares.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{design_matrix, encode_column, MixedDataset};
use crate::graph::CausalGraph;
use crate::stats::{self, StatsError};

/// Effects smaller than this in magnitude carry [`EffectSign::Zero`].
pub const ZERO_EFFECT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectSign {
    Positive,
    Negative,
    Zero,
}

impl EffectSign {
    pub fn of(effect: f64) -> Self {
        if effect.abs() < ZERO_EFFECT {
            EffectSign::Zero
        } else if effect > 0.0 {
            EffectSign::Positive
        } else {
            EffectSign::Negative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEffect {
    pub from: String,
    pub to: String,
    pub adjustment_set: Vec<String>,
    pub effect: f64,
    pub std_error: f64,
    /// `log(1 + |effect|)`, used as edge thickness.
    pub display_weight: f64,
    pub sign: EffectSign,
    /// For a multi-category treatment: the category whose contrast against
    /// the reference was reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<String>,
}

impl EdgeEffect {
    pub fn new(
        from: String,
        to: String,
        adjustment_set: Vec<String>,
        effect: f64,
        std_error: f64,
        contrast: Option<String>,
    ) -> Self {
        Self {
            from,
            to,
            adjustment_set,
            effect,
            std_error,
            display_weight: display_weight(effect),
            sign: EffectSign::of(effect),
            contrast,
        }
    }
}

pub fn display_weight(effect: f64) -> f64 {
    effect.abs().ln_1p()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectError {
    #[error("treatment and outcome are the same node {0:?}")]
    SameNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no directed edge {0:?} -> {1:?}")]
    NoEdge(String, String),
    #[error("no directed path from {0:?} to {1:?}")]
    NoCausalPath(String, String),
    #[error("parents of {0:?} do not satisfy the backdoor criterion")]
    InvalidAdjustment(String),
    #[error("treatment {0:?} is constant")]
    DegenerateTreatment(String),
    #[error("singular design; collinear columns {columns:?}")]
    Collinear { columns: Vec<String> },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The adjustment set for `x → y`: the parents of `x`, checked against the
/// backdoor criterion.
pub fn backdoor_set(g: &CausalGraph, x: &str, y: &str) -> Result<Vec<String>, EffectError> {
    if x == y {
        return Err(EffectError::SameNode(x.to_string()));
    }
    for n in [x, y] {
        if !g.has_node(n) {
            return Err(EffectError::UnknownNode(n.to_string()));
        }
    }
    if !g.has_directed_path(x, y) {
        return Err(EffectError::NoCausalPath(x.to_string(), y.to_string()));
    }
    let z = g.parents(x);
    if !satisfies_backdoor(g, x, y, &z) {
        return Err(EffectError::InvalidAdjustment(x.to_string()));
    }
    Ok(z)
}

/// Backdoor criterion: no element of `z` descends from `x`, and `z`
/// d-separates `x` and `y` once the edges leaving `x` are removed.
pub fn satisfies_backdoor(g: &CausalGraph, x: &str, y: &str, z: &[String]) -> bool {
    let desc = g.descendants(x);
    if z.iter().any(|n| desc.contains(n) || n == x || n == y) {
        return false;
    }
    let edges: Vec<(String, String)> = g
        .directed_pairs()
        .filter(|(f, _)| *f != x)
        .map(|(f, t)| (f.to_string(), t.to_string()))
        .collect();
    d_separated(&edges, x, y, z)
}

/// Reachability-based d-separation test ("Bayes ball") on a DAG given as a
/// directed edge list.
pub fn d_separated(edges: &[(String, String)], x: &str, y: &str, z: &[String]) -> bool {
    let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, t) in edges {
        parents.entry(t.as_str()).or_default().push(f.as_str());
        children.entry(f.as_str()).or_default().push(t.as_str());
    }
    let observed: BTreeSet<&str> = z.iter().map(String::as_str).collect();
    // Ancestors of the conditioning set (including itself) decide whether a
    // collider is open.
    let mut anc: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = observed.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if anc.insert(n) {
            for &p in parents.get(n).into_iter().flatten() {
                queue.push_back(p);
            }
        }
    }
    // (node, arrived_from_child)
    let mut visited: BTreeSet<(&str, bool)> = BTreeSet::new();
    let mut queue: VecDeque<(&str, bool)> = VecDeque::from([(x, true)]);
    while let Some((node, up)) = queue.pop_front() {
        if !visited.insert((node, up)) {
            continue;
        }
        let is_obs = observed.contains(node);
        if node == y && !is_obs {
            return false;
        }
        if up {
            if !is_obs {
                for &p in parents.get(node).into_iter().flatten() {
                    queue.push_back((p, true));
                }
                for &c in children.get(node).into_iter().flatten() {
                    queue.push_back((c, false));
                }
            }
        } else {
            if !is_obs {
                for &c in children.get(node).into_iter().flatten() {
                    queue.push_back((c, false));
                }
            }
            if anc.contains(node) {
                for &p in parents.get(node).into_iter().flatten() {
                    queue.push_back((p, true));
                }
            }
        }
    }
    true
}

/// Least-squares effect of `from` on `to`, adjusting for the backdoor set.
pub fn estimate_effect(ds: &MixedDataset, g: &CausalGraph, from: &str, to: &str) -> Result<EdgeEffect, EffectError> {
    if g.edge(from, to).filter(|e| e.directed).is_none() {
        return Err(EffectError::NoEdge(from.to_string(), to.to_string()));
    }
    let adjustment = backdoor_set(g, from, to)?;
    let col = |name: &str| ds.index_of(name).ok_or_else(|| EffectError::UnknownNode(name.to_string()));
    let t_idx = col(from)?;
    let y_idx = col(to)?;

    let treat = ds.column(t_idx);
    if treat.iter().all(|v| *v == treat[0]) {
        return Err(EffectError::DegenerateTreatment(from.to_string()));
    }
    let mut named: Vec<(String, Vec<f64>)> = encode_column(ds, t_idx);
    let treatment_cols = named.len();
    for a in &adjustment {
        named.extend(encode_column(ds, col(a)?));
    }
    let refs: Vec<&[f64]> = named.iter().map(|(_, c)| c.as_slice()).collect();
    let x = design_matrix(ds.row_count(), &refs);
    let y = DVector::from_column_slice(ds.column(y_idx));
    let fit = stats::ols(&x, &y).map_err(|e| match e {
        StatsError::Collinear { columns } => EffectError::Collinear {
            columns: columns
                .into_iter()
                .map(|c| if c == 0 { "(intercept)".to_string() } else { named[c - 1].0.clone() })
                .collect(),
        },
        other => EffectError::Stats(other),
    })?;

    let (best, contrast) = if ds.variable(t_idx).is_categorical() && treatment_cols > 1 {
        let k = (0..treatment_cols)
            .max_by(|a, b| fit.coefficients[a + 1].abs().total_cmp(&fit.coefficients[b + 1].abs()))
            .expect("at least one contrast");
        (k, Some(named[k].0.clone()))
    } else {
        (0, None)
    };
    Ok(EdgeEffect::new(
        from.to_string(),
        to.to_string(),
        adjustment,
        fit.coefficients[best + 1],
        fit.std_errors[best + 1],
        contrast,
    ))
}

/// Fills in the effect of every directed edge. Edges whose estimation fails
/// keep no effect; the failures are returned alongside.
pub fn annotate_effects(ds: &MixedDataset, g: &mut CausalGraph) -> Vec<(String, String, EffectError)> {
    let snapshot = g.clone();
    let mut failures = Vec::new();
    for e in g.edges.iter_mut().filter(|e| e.directed) {
        match estimate_effect(ds, &snapshot, &e.from, &e.to) {
            Ok(eff) => e.effect = Some(eff),
            Err(err) => {
                e.effect = None;
                failures.push((e.from.clone(), e.to.clone(), err));
            }
        }
    }
    failures
}

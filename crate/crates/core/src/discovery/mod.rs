//! Causal discovery over a selected variable subset: a PC-stable backbone, a
//! continuous acyclicity-constrained learner with epoch-level control, and a
//! hybrid mixed-type learner.

mod acyclicity;
mod backbone;
mod ci;
mod continuous;
mod hybrid;
pub mod job;
mod pc;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, MixedDataset};

pub use acyclicity::{acyclicity_h, matrix_exp};
pub use backbone::{backbone_graph, overlays, OverlayEdge};
pub use ci::{ci_test, CiMethod, CiResult};
pub use continuous::{threshold_edges, ContinuousLearner, EpochOutcome};
pub use hybrid::{run_hybrid, HybridResult};
pub use pc::{pc_skeleton, pc_skeleton_in_order, run_pc, Skeleton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscoveryError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid job configuration: {0}")]
    Config(String),
    #[error("conditional independence test needs distinct variables outside the conditioning set")]
    BadCiQuery,
    #[error("at least two variables are required")]
    TooFewVariables,
    #[error("no {0:?} result is available yet")]
    NotReady(Algorithm),
}

/// Partially directed graph as produced by PC: a CPDAG estimate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdag {
    #[serde(default)]
    pub nodes: Vec<String>,
    pub directed: BTreeSet<(String, String)>,
    /// Stored with the smaller name first.
    pub undirected: BTreeSet<(String, String)>,
}

impl Pdag {
    pub fn skeleton(&self) -> BTreeSet<(String, String)> {
        self.directed
            .iter()
            .map(|(a, b)| crate::graph::unordered(a, b))
            .chain(self.undirected.iter().cloned())
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        let nodes: BTreeSet<&String> = self.nodes.iter().collect();
        let mut pairs = BTreeSet::new();
        for (a, b) in self.directed.iter().chain(&self.undirected) {
            if a == b || !nodes.contains(a) || !nodes.contains(b) {
                return false;
            }
            if !pairs.insert(crate::graph::unordered(a, b)) {
                return false;
            }
        }
        self.undirected.iter().all(|(a, b)| a < b)
            && crate::graph::find_cycle(&self.nodes, self.directed.iter().map(|(a, b)| (a.as_str(), b.as_str()))).is_none()
    }
}

/// Weighted adjacency matrix; `matrix[i][j]` is the weight of `i → j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub variable_order: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn zeros(variable_order: Vec<String>) -> Self {
        let d = variable_order.len();
        Self { variable_order, matrix: vec![vec![0.0; d]; d] }
    }

    pub fn dim(&self) -> usize {
        self.variable_order.len()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |i, j| self.matrix[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: u32,
    pub elbo: f64,
    pub nll: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "message")]
pub enum AlgoStatus {
    Pending,
    Running,
    Paused,
    Done,
    Stopped,
    Failed(String),
    /// Not requested in the job configuration.
    Skipped,
}

impl AlgoStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, AlgoStatus::Done | AlgoStatus::Stopped | AlgoStatus::Failed(_) | AlgoStatus::Skipped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pc,
    Continuous,
    Hybrid,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pc" => Ok(Algorithm::Pc),
            "continuous" => Ok(Algorithm::Continuous),
            "hybrid" => Ok(Algorithm::Hybrid),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousResult {
    pub matrix: WeightMatrix,
    pub edges: Vec<(String, String)>,
    pub losses: Vec<LossRecord>,
    pub epoch: u32,
    /// Acyclicity penalty of `matrix`.
    pub h: f64,
    pub threshold: f64,
    /// Whether the penalty schedule has reached `h ≤ h_tol`.
    #[serde(default)]
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSet {
    pub pc: AlgoStatus,
    pub continuous: AlgoStatus,
    pub hybrid: AlgoStatus,
}

impl StatusSet {
    pub fn get(&self, algo: Algorithm) -> &AlgoStatus {
        match algo {
            Algorithm::Pc => &self.pc,
            Algorithm::Continuous => &self.continuous,
            Algorithm::Hybrid => &self.hybrid,
        }
    }

    pub fn set(&mut self, algo: Algorithm, status: AlgoStatus) {
        match algo {
            Algorithm::Pc => self.pc = status,
            Algorithm::Continuous => self.continuous = status,
            Algorithm::Hybrid => self.hybrid = status,
        }
    }

    pub fn all_terminal(&self) -> bool {
        self.pc.is_terminal() && self.continuous.is_terminal() && self.hybrid.is_terminal()
    }
}

/// Per-algorithm results at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySnapshot {
    pub variables: Vec<String>,
    pub pc: Option<Pdag>,
    pub continuous: Option<ContinuousResult>,
    pub hybrid: Option<HybridResult>,
    pub status: StatusSet,
}

impl DiscoverySnapshot {
    pub fn pending(variables: Vec<String>, algorithms: &[Algorithm]) -> Self {
        let st = |a| if algorithms.contains(&a) { AlgoStatus::Pending } else { AlgoStatus::Skipped };
        Self {
            variables,
            pc: None,
            continuous: None,
            hybrid: None,
            status: StatusSet {
                pc: st(Algorithm::Pc),
                continuous: st(Algorithm::Continuous),
                hybrid: st(Algorithm::Hybrid),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuousConfig {
    pub max_epochs: u32,
    pub hidden_width: usize,
    /// Edge threshold τ on |weight|.
    pub threshold: f64,
    pub rho_init: f64,
    pub rho_factor: f64,
    pub rho_max: f64,
    /// Required shrink factor of h between dual updates.
    pub h_shrink: f64,
    /// Constraint residual at which training is considered converged.
    pub h_tol: f64,
    /// Optimiser iterations per epoch.
    pub steps_per_epoch: usize,
    /// Standardise continuous columns instead of only centring them.
    pub standardize: bool,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        Self {
            max_epochs: 300,
            hidden_width: 16,
            threshold: 0.3,
            rho_init: 1.0,
            rho_factor: 10.0,
            rho_max: 1e16,
            h_shrink: 0.25,
            h_tol: 1e-8,
            steps_per_epoch: 25,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Per-parameter score penalty; `ln(n) / 2` when absent.
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub dataset: String,
    /// Selected variables, including the outcome.
    pub variables: Vec<String>,
    pub outcome: String,
    #[serde(default = "default_alpha")]
    pub ci_alpha: f64,
    #[serde(default)]
    pub continuous: ContinuousConfig,
    #[serde(default)]
    pub hybrid: HybridConfig,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
}

fn default_alpha() -> f64 {
    0.05
}

fn all_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Pc, Algorithm::Continuous, Algorithm::Hybrid]
}

impl JobConfig {
    pub fn new(dataset: impl Into<String>, variables: Vec<String>, outcome: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            variables,
            outcome: outcome.into(),
            ci_alpha: default_alpha(),
            continuous: ContinuousConfig::default(),
            hybrid: HybridConfig::default(),
            rng_seed: 0,
            algorithms: all_algorithms(),
        }
    }

    pub fn validate(&self) -> Result<(), DiscoveryError> {
        let bad = |m: &str| Err(DiscoveryError::Config(m.to_string()));
        if !(self.ci_alpha > 0.0 && self.ci_alpha < 1.0) {
            return bad("ci_alpha must lie in (0, 1)");
        }
        if !(self.continuous.threshold > 0.0 && self.continuous.threshold.is_finite()) {
            return bad("threshold must be positive");
        }
        if self.continuous.max_epochs < 1 {
            return bad("max_epochs must be at least 1");
        }
        if self.continuous.hidden_width < 1 || self.continuous.steps_per_epoch < 1 {
            return bad("hidden_width and steps_per_epoch must be positive");
        }
        if !(self.continuous.h_shrink > 0.0 && self.continuous.h_shrink < 1.0) || !(self.continuous.rho_factor > 1.0) {
            return bad("penalty schedule parameters out of range");
        }
        if let Some(p) = self.hybrid.penalty {
            if !(p >= 0.0 && p.is_finite()) {
                return bad("hybrid penalty must be non-negative");
            }
        }
        if self.variables.len() < 2 {
            return Err(DiscoveryError::TooFewVariables);
        }
        let uniq: BTreeSet<&String> = self.variables.iter().collect();
        if uniq.len() != self.variables.len() {
            return bad("duplicate variable in selection");
        }
        if !uniq.contains(&self.outcome) {
            return bad("outcome must be among the selected variables");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithm selected");
        }
        Ok(())
    }
}

/// Runs every requested algorithm to completion on the calling thread.
pub fn run_discovery(ds: &MixedDataset, config: &JobConfig) -> Result<DiscoverySnapshot, DiscoveryError> {
    config.validate()?;
    for v in &config.variables {
        ds.require(v)?;
    }
    let mut snap = DiscoverySnapshot::pending(config.variables.clone(), &config.algorithms);
    if config.algorithms.contains(&Algorithm::Pc) {
        match run_pc(ds, &config.variables, config.ci_alpha) {
            Ok(p) => {
                snap.pc = Some(p);
                snap.status.pc = AlgoStatus::Done;
            }
            Err(e) => snap.status.pc = AlgoStatus::Failed(e.to_string()),
        }
    }
    if config.algorithms.contains(&Algorithm::Hybrid) {
        match run_hybrid(ds, &config.variables, config.ci_alpha, &config.hybrid) {
            Ok(h) => {
                snap.hybrid = Some(h);
                snap.status.hybrid = AlgoStatus::Done;
            }
            Err(e) => snap.status.hybrid = AlgoStatus::Failed(e.to_string()),
        }
    }
    if config.algorithms.contains(&Algorithm::Continuous) {
        let mut learner = ContinuousLearner::new(ds, &config.variables, config.continuous.clone(), config.rng_seed)?;
        let status = loop {
            if learner.epoch() >= config.continuous.max_epochs {
                break AlgoStatus::Done;
            }
            if let EpochOutcome::Failed(msg) = learner.step() {
                break AlgoStatus::Failed(msg);
            }
        };
        snap.continuous = Some(learner.result());
        snap.status.continuous = status;
    }
    Ok(snap)
}

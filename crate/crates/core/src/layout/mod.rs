//! Layered drawings of causal graphs, the multi-outcome supergraph, the
//! horizontally compressed per-outcome views and their horizontal stress.

mod compress;
mod export;
mod layered;
mod stress;
mod supergraph;

use thiserror::Error;

pub use compress::{compress, CompressedLayout};
pub use export::{to_dot, to_svg, SvgEdge, SvgScene};
pub use layered::{attach_layout, crossings, layered_layout, layered_layout_unswept, layout_graph, layering_edges, LaidEdge, LayeredLayout};
pub use stress::{stress_of, stress_x};
pub use supergraph::{build_supergraph, extract_subgraph, SuperEdge, SuperLayout};

/// Grid spacing shared by every layout and by the stress metric.
pub const UNIT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("a layout needs at least one node")]
    Empty,
    #[error("edge endpoint {0:?} is not a node")]
    UnknownNode(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("edges contain the cycle {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("a supergraph needs at least two graphs, got {0}")]
    TooFewGraphs(usize),
    #[error("graph id {0:?} appears twice")]
    DuplicateGraph(String),
    #[error("unknown graph id {0:?}")]
    UnknownGraph(String),
}

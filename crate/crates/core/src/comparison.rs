//! Multi-outcome comparison bundle: the supergraph, extracted and compressed
//! subgraphs, movement glyphs, thumbnails, a reference grid and stress.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::CausalGraph;
use crate::layout::{build_supergraph, compress, extract_subgraph, stress_of, CompressedLayout, LayeredLayout, LayoutError, SuperLayout, UNIT};

pub const MAX_BARS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlyphSide {
    Left,
    Right,
    None,
}

/// Arrow glyph telling how far a node moved between the extracted and the
/// compressed view. The arrow sits on the side the node came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphMeta {
    pub node: String,
    pub side: GlyphSide,
    pub bars: u32,
}

pub fn glyph(node: impl Into<String>, dx: f64) -> GlyphMeta {
    let node = node.into();
    if dx.abs() < 0.5 * UNIT || dx.is_nan() {
        return GlyphMeta { node, side: GlyphSide::None, bars: 0 };
    }
    let bars = ((dx.abs() / UNIT).round() as u32).min(MAX_BARS);
    let side = if dx > 0.0 { GlyphSide::Left } else { GlyphSide::Right };
    GlyphMeta { node, side, bars }
}

/// Bounding box of a subgraph inside the supergraph, normalised to [0,1]².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thumbnail {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressEntry {
    pub graph_id: String,
    pub extracted: f64,
    pub compressed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLine {
    pub at: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub unit: f64,
    pub columns: Vec<GridLine>,
    pub rows: Vec<GridLine>,
}

/// Owning graphs of every node, in selection order; one slice each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipPalette {
    pub slices: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSet {
    pub graph_ids: Vec<String>,
    pub graphs: Vec<CausalGraph>,
    pub supergraph: SuperLayout,
    pub extracted: BTreeMap<String, LayeredLayout>,
    pub compressed: CompressedLayout,
    pub glyphs: BTreeMap<String, Vec<GlyphMeta>>,
    pub thumbnails: BTreeMap<String, Thumbnail>,
    pub stress: Vec<StressEntry>,
    pub grid: GridMeta,
    pub palette: MembershipPalette,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("a comparison needs at least two graphs, got {0}")]
    TooFewGraphs(usize),
    #[error("unknown graph id {0:?}")]
    UnknownGraph(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

fn thumbnail(sub: &LayeredLayout, sx: (f64, f64), sy: (f64, f64)) -> Thumbnail {
    let axis = |lo: f64, hi: f64, (a, b): (f64, f64)| {
        if b > a {
            (((lo - a) / (b - a)).clamp(0.0, 1.0), ((hi - a) / (b - a)).clamp(0.0, 1.0))
        } else {
            (0.0, 1.0)
        }
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in sub.nodes.values() {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if !x0.is_finite() {
        return Thumbnail { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
    }
    let (x0, x1) = axis(x0, x1, sx);
    let (y0, y1) = axis(y0, y1, sy);
    Thumbnail { x0, y0, x1, y1 }
}

fn grid(layouts: &[&LayeredLayout]) -> GridMeta {
    let (mut lo, mut hi, mut depth) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for l in layouts {
        if let Some((a, b)) = l.x_range() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        depth = depth.max(l.nodes.values().map(|p| p.rank + 1).max().unwrap_or(0));
    }
    let columns = if lo.is_finite() {
        let (a, b) = ((lo / UNIT).floor() as i64, (hi / UNIT).ceil() as i64);
        (a..=b).map(|k| GridLine { at: k as f64 * UNIT, label: k.to_string() }).collect()
    } else {
        Vec::new()
    };
    let rows = (0..depth).map(|r| GridLine { at: r as f64 * UNIT, label: r.to_string() }).collect();
    GridMeta { unit: UNIT, columns, rows }
}

/// Builds every view of the given graphs, in the given order.
pub fn assemble_graphs(graphs: &[CausalGraph]) -> Result<ComparisonSet, ComparisonError> {
    if graphs.len() < 2 {
        return Err(ComparisonError::TooFewGraphs(graphs.len()));
    }
    let supergraph = build_supergraph(graphs)?;
    let compressed = compress(&supergraph)?;
    let mut extracted = BTreeMap::new();
    let mut glyphs = BTreeMap::new();
    let mut thumbnails = BTreeMap::new();
    let mut stress = Vec::new();
    let sx = supergraph.layout.x_range().unwrap_or((0.0, 0.0));
    let ys: Vec<f64> = supergraph.layout.nodes.values().map(|p| p.y).collect();
    let sy = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    for id in &supergraph.graph_ids {
        let sub = extract_subgraph(&supergraph, id)?;
        let comp = &compressed.subgraphs[id];
        stress.push(StressEntry { graph_id: id.clone(), extracted: stress_of(&sub), compressed: stress_of(comp) });
        glyphs.insert(id.clone(), compressed.delta[id].iter().map(|(n, dx)| glyph(n.clone(), *dx)).collect());
        thumbnails.insert(id.clone(), thumbnail(&sub, sx, sy));
        extracted.insert(id.clone(), sub);
    }
    let mut all: Vec<&LayeredLayout> = vec![&supergraph.layout];
    all.extend(compressed.subgraphs.values());
    let grid = grid(&all);
    let palette = MembershipPalette { slices: supergraph.membership.clone() };
    Ok(ComparisonSet {
        graph_ids: supergraph.graph_ids.clone(),
        graphs: graphs.to_vec(),
        supergraph,
        extracted,
        compressed,
        glyphs,
        thumbnails,
        stress,
        grid,
        palette,
    })
}

/// Looks every id up in `store` and assembles the comparison.
pub fn assemble<F>(ids: &[String], store: F) -> Result<ComparisonSet, ComparisonError>
where
    F: Fn(&str) -> Option<CausalGraph>,
{
    if ids.len() < 2 {
        return Err(ComparisonError::TooFewGraphs(ids.len()));
    }
    let graphs = ids
        .iter()
        .map(|id| {
            let mut g = store(id).ok_or_else(|| ComparisonError::UnknownGraph(id.clone()))?;
            g.id = id.clone();
            Ok(g)
        })
        .collect::<Result<Vec<_>, ComparisonError>>()?;
    assemble_graphs(&graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSource, GraphEdge};

    fn graph(id: &str, outcome: &str, nodes: &[&str], edges: &[(&str, &str)]) -> CausalGraph {
        CausalGraph::new(
            id,
            outcome,
            nodes.iter().map(|s| s.to_string()).collect(),
            edges.iter().map(|(a, b)| GraphEdge::directed(*a, *b, EdgeSource::User)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn glyph_rule() {
        assert_eq!(glyph("a", 0.0), GlyphMeta { node: "a".into(), side: GlyphSide::None, bars: 0 });
        assert_eq!(glyph("a", 2.9), GlyphMeta { node: "a".into(), side: GlyphSide::Left, bars: 3 });
        assert_eq!(glyph("a", -0.5).side, GlyphSide::Right);
        assert_eq!(glyph("a", 0.49).bars, 0);
        assert_eq!(glyph("a", -40.0).bars, MAX_BARS);
    }

    #[test]
    fn left_half_thumbnail() {
        // Two disjoint five-leaf fans: leaves on columns 0..4 and 5..9.
        let a = graph("a", "P", &["P", "a1", "a2", "a3", "a4", "a5"], &[("P", "a1"), ("P", "a2"), ("P", "a3"), ("P", "a4"), ("P", "a5")]);
        let b = graph("b", "Q", &["Q", "b1", "b2", "b3", "b4", "b5"], &[("Q", "b1"), ("Q", "b2"), ("Q", "b3"), ("Q", "b4"), ("Q", "b5")]);
        let set = assemble_graphs(&[a, b]).unwrap();
        let t = set.thumbnails["a"];
        assert_eq!((t.x0, t.y0, t.y1), (0.0, 0.0, 1.0));
        assert!((t.x1 - 4.0 / 9.0).abs() < 1e-12);
        let tb = set.thumbnails["b"];
        assert!((tb.x0 - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(tb.x1, 1.0);
    }

    #[test]
    fn lookup_errors() {
        let a = graph("a", "B", &["A", "B"], &[("A", "B")]);
        let store = |id: &str| (id == "a").then(|| a.clone());
        assert_eq!(assemble(&["a".into()], store).unwrap_err(), ComparisonError::TooFewGraphs(1));
        assert_eq!(assemble(&["a".into(), "x".into()], store).unwrap_err(), ComparisonError::UnknownGraph("x".into()));
    }

    #[test]
    fn modes_cover_same_nodes() {
        let a = graph("a", "C", &["A", "B", "C"], &[("A", "B"), ("B", "C"), ("A", "C")]);
        let b = graph("b", "D", &["A", "B", "D", "E"], &[("A", "D"), ("B", "D"), ("E", "D")]);
        let set = assemble_graphs(&[a, b]).unwrap();
        for id in &set.graph_ids {
            let ex: Vec<_> = set.extracted[id].nodes.keys().collect();
            let co: Vec<_> = set.compressed.subgraphs[id].nodes.keys().collect();
            assert_eq!(ex, co);
            assert_eq!(set.extracted[id].edges.len(), set.compressed.subgraphs[id].edges.len());
            assert_eq!(set.glyphs[id].len(), ex.len());
        }
        let slices: usize = set.palette.slices.values().map(Vec::len).sum();
        assert_eq!(slices, 3 + 4);
    }
}

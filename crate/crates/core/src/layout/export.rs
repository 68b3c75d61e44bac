//! SVG and DOT emitters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::layered::LayeredLayout;
use crate::effects::EffectSign;
use crate::graph::{CausalGraph, NodePosition};

const SCALE_X: f64 = 80.0;
const SCALE_Y: f64 = 90.0;
const MARGIN: f64 = 50.0;
const RADIUS: f64 = 14.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SvgEdge {
    pub from: String,
    pub to: String,
    pub directed: bool,
    pub reversed: bool,
    pub sign: Option<EffectSign>,
    pub display_weight: Option<f64>,
    pub bends: Vec<(f64, f64)>,
}

/// Everything the SVG emitter draws for one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgScene {
    pub title: String,
    pub nodes: BTreeMap<String, NodePosition>,
    pub edges: Vec<SvgEdge>,
    pub outcomes: BTreeSet<String>,
}

impl SvgScene {
    /// Edge styles are looked up in `graphs` by exact direction.
    pub fn new(title: impl Into<String>, layout: &LayeredLayout, outcomes: impl IntoIterator<Item = String>, graphs: &[&CausalGraph]) -> Self {
        let edges = layout
            .edges
            .iter()
            .map(|e| {
                let effect = graphs.iter().find_map(|g| g.edge(&e.from, &e.to).and_then(|ge| ge.effect.as_ref()));
                SvgEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    directed: e.directed,
                    reversed: e.reversed,
                    sign: effect.map(|f| f.sign),
                    display_weight: effect.map(|f| f.display_weight),
                    bends: e.bends.clone(),
                }
            })
            .collect();
        SvgScene { title: title.into(), nodes: layout.nodes.clone(), edges, outcomes: outcomes.into_iter().collect() }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => out.push('\u{fffd}'),
            c => out.push(c),
        }
    }
    out
}

fn star(cx: f64, cy: f64) -> String {
    (0..16)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / 8.0;
            let r = if k % 2 == 0 { RADIUS + 7.0 } else { RADIUS + 2.0 };
            format!("{:.1},{:.1}", cx + r * a.cos(), cy + r * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn to_svg(scene: &SvgScene) -> String {
    let xs = scene.nodes.values().map(|p| p.x).chain(scene.edges.iter().flat_map(|e| e.bends.iter().map(|b| b.0)));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let depth = scene.nodes.values().map(|p| p.y).fold(0.0, f64::max);
    let px = |x: f64| MARGIN + (x - lo) * SCALE_X;
    let py = |y: f64| MARGIN + 20.0 + y * SCALE_Y;
    let width = 2.0 * MARGIN + (hi - lo) * SCALE_X;
    let height = 2.0 * MARGIN + 40.0 + depth * SCALE_Y;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    out.push_str(concat!(
        r#"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto-start-reverse">"#,
        r##"<path d="M0,0 L10,5 L0,10 z" fill="#333"/></marker></defs>"##,
        "\n"
    ));
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, xml_escape(&scene.title));
    out.push_str("<g class=\"edges\">\n");
    for e in &scene.edges {
        let (Some(a), Some(b)) = (scene.nodes.get(&e.from), scene.nodes.get(&e.to)) else {
            continue;
        };
        let mut pts = vec![(px(a.x), py(a.y))];
        pts.extend(e.bends.iter().map(|&(x, y)| (px(x), py(y))));
        pts.push((px(b.x), py(b.y)));
        // Stop the line at the rim of the target disk so the arrow shows.
        let n = pts.len();
        let (dx, dy) = (pts[n - 1].0 - pts[n - 2].0, pts[n - 1].1 - pts[n - 2].1);
        let len = dx.hypot(dy);
        if len > RADIUS {
            pts[n - 1] = (pts[n - 1].0 - dx / len * RADIUS, pts[n - 1].1 - dy / len * RADIUS);
        }
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let width = 1.0 + 2.0 * e.display_weight.unwrap_or(0.25);
        let mut class = vec!["edge"];
        let mut extra = String::new();
        if e.sign == Some(EffectSign::Negative) {
            class.push("negative");
            extra.push_str(r#" stroke-dasharray="6 4""#);
        }
        if e.reversed {
            class.push("reversed");
        }
        if e.directed {
            extra.push_str(r#" marker-end="url(#arrow)""#);
        } else {
            class.push("undirected");
        }
        let stroke = if e.reversed { "#b03a2e" } else { "#333" };
        let _ = writeln!(
            out,
            r#"<polyline class="{}" data-from="{}" data-to="{}" points="{}" fill="none" stroke="{}" stroke-width="{:.2}"{}/>"#,
            class.join(" "),
            xml_escape(&e.from),
            xml_escape(&e.to),
            d.join(" "),
            stroke,
            width,
            extra
        );
    }
    out.push_str("</g>\n<g class=\"nodes\">\n");
    for (name, p) in &scene.nodes {
        let (cx, cy) = (px(p.x), py(p.y));
        let label = xml_escape(name);
        let _ = write!(out, r#"<g class="node" data-name="{label}">"#);
        if scene.outcomes.contains(name) {
            let _ = write!(out, r##"<polygon class="outcome" points="{}" fill="none" stroke="#7d3c98" stroke-width="1.5"/>"##, star(cx, cy));
        }
        let _ = write!(out, r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{RADIUS}" fill="#d6eaf8" stroke="#1b4f72"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{label}</text></g>"#,
            cy + RADIUS + 14.0
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n"))
}

/// Graphviz form of a causal graph, pinned to `layout` when given.
pub fn to_dot(g: &CausalGraph, layout: Option<&LayeredLayout>) -> String {
    let mut out = format!("digraph {} {{\n  rankdir=TB;\n", dot_id(&g.id));
    for n in &g.nodes {
        let mut attrs = Vec::new();
        if *n == g.outcome {
            attrs.push("shape=doublecircle".to_string());
        }
        if let Some(p) = layout.and_then(|l| l.nodes.get(n)) {
            attrs.push(format!("pos=\"{},{}!\"", p.x, -p.y));
        }
        let suffix = if attrs.is_empty() { String::new() } else { format!(" [{}]", attrs.join(", ")) };
        let _ = writeln!(out, "  {}{suffix};", dot_id(n));
    }
    for e in &g.edges {
        let mut attrs = Vec::new();
        if !e.directed {
            attrs.push("dir=none".to_string());
        }
        if let Some(f) = &e.effect {
            if f.sign == EffectSign::Negative {
                attrs.push("style=dashed".to_string());
            }
            attrs.push(format!("penwidth={:.3}", 1.0 + 2.0 * f.display_weight));
            attrs.push(format!("label=\"{:.3}\"", f.effect));
        }
        let suffix = if attrs.is_empty() { String::new() } else { format!(" [{}]", attrs.join(", ")) };
        let _ = writeln!(out, "  {} -> {}{suffix};", dot_id(&e.from), dot_id(&e.to));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSource, GraphEdge};
    use crate::layout::layout_graph;

    fn graph() -> CausalGraph {
        CausalGraph::new(
            "g<1>",
            "C",
            vec!["A & B".into(), "B".into(), "C".into()],
            vec![GraphEdge::directed("A & B", "B", EdgeSource::Pc), GraphEdge::undirected("B", "C", EdgeSource::Pc)],
        )
        .unwrap()
    }

    #[test]
    fn svg_lists_each_node_once() {
        let g = graph();
        let l = layout_graph(&g).unwrap();
        let svg = to_svg(&SvgScene::new(&g.id, &l, [g.outcome.clone()], &[&g]));
        assert_eq!(svg.matches(r#"class="node""#).count(), 3);
        assert_eq!(svg.matches(r#"data-name="A &amp; B""#).count(), 1);
        assert_eq!(svg.matches(r#"class="outcome""#).count(), 1);
        assert!(svg.contains("g&lt;1&gt;"));
    }

    #[test]
    fn dot_marks_undirected() {
        let g = graph();
        let dot = to_dot(&g, None);
        assert!(dot.contains("\"B\" -> \"C\" [dir=none];"));
        assert!(dot.contains("\"C\" [shape=doublecircle];"));
    }
}

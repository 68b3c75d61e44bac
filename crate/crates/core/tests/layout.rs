use std::collections::{BTreeMap, BTreeSet};

use causeway_core::comparison::{assemble_graphs, glyph};
use causeway_core::graph::{CausalGraph, EdgeSource, GraphEdge};
use causeway_core::layout::{
    build_supergraph, compress, extract_subgraph, layered_layout, layered_layout_unswept, layout_graph, to_svg,
    LayeredLayout, SuperLayout, SvgScene,
};
use causeway_core::synth::outcome_graphs;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force crossing count: every pair of edge polylines, every pair of
/// segments spanning the same rank interval.
fn brute_crossings(l: &LayeredLayout) -> usize {
    let polylines: Vec<Vec<(f64, f64)>> = l
        .edges
        .iter()
        .map(|e| {
            let (a, b) = (l.nodes[&e.from], l.nodes[&e.to]);
            let mut pts = vec![(a.x, a.y)];
            pts.extend(e.bends.iter().copied());
            pts.push((b.x, b.y));
            pts
        })
        .collect();
    let mut count = 0;
    for i in 0..polylines.len() {
        for j in i + 1..polylines.len() {
            for s in polylines[i].windows(2) {
                for t in polylines[j].windows(2) {
                    let (s0, s1) = if s[0].1 < s[1].1 { (s[0], s[1]) } else { (s[1], s[0]) };
                    let (t0, t1) = if t[0].1 < t[1].1 { (t[0], t[1]) } else { (t[1], t[0]) };
                    if s0.1 == t0.1 && s1.1 == t1.1 && (s0.0 - t0.0) * (s1.0 - t1.0) < 0.0 {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

fn random_dag(seed: u64) -> (Vec<String>, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=14);
    let names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let p = rng.random_range(0.1..0.45);
    let mut edges = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if rng.random_bool(p) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    (names, edges)
}

fn rank_orders(l: &LayeredLayout) -> Vec<Vec<String>> {
    l.rows()
}

fn order_violations(s: &SuperLayout) -> usize {
    let c = compress(s).unwrap();
    let mut bad = 0;
    for id in &s.graph_ids {
        let ex = extract_subgraph(s, id).unwrap();
        let co = &c.subgraphs[id];
        for (n, p) in &ex.nodes {
            if co.nodes[n].rank != p.rank || co.nodes[n].y != p.y {
                bad += 1;
            }
        }
        // Compare strict x order within every rank.
        for row in rank_orders(&ex) {
            for w in row.windows(2) {
                if !(co.nodes[&w[0]].x < co.nodes[&w[1]].x) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn instance(seed: u64) -> Vec<CausalGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let k = rng.random_range(3..=6);
    let frac = rng.random_range(0.3..=0.6);
    outcome_graphs(seed, k, 5, 10, frac)
}

#[test]
fn barycenter_never_adds_crossings() {
    for seed in 0..50 {
        let (nodes, edges) = random_dag(seed);
        let initial = layered_layout_unswept(&nodes, &edges).unwrap();
        let swept = layered_layout(&nodes, &edges).unwrap();
        assert!(brute_crossings(&swept) <= brute_crossings(&initial), "seed {seed}");
        assert_eq!(brute_crossings(&swept), causeway_core::layout::crossings(&swept));
    }
}

#[test]
fn three_outcome_supergraph_lists_shared_nodes_once() {
    let g = |id: &str, out: &str, nodes: &[&str], edges: &[(&str, &str)]| {
        CausalGraph::new(
            id,
            out,
            nodes.iter().map(|s| s.to_string()).collect(),
            edges.iter().map(|(a, b)| GraphEdge::directed(*a, *b, EdgeSource::User)).collect(),
        )
        .unwrap()
    };
    let graphs = vec![
        g("g0", "Y0", &["Age", "Income", "Smoking", "BMI", "Sleep", "Y0"], &[("Age", "Income"), ("Income", "BMI"), ("Smoking", "Y0"), ("BMI", "Y0"), ("Sleep", "Y0")]),
        g("g1", "Y1", &["Age", "Income", "BMI", "Diet", "Exercise", "Alcohol", "Y1"], &[("Age", "BMI"), ("Diet", "BMI"), ("Exercise", "Y1"), ("BMI", "Y1"), ("Alcohol", "Y1"), ("Income", "Diet")]),
        g("g2", "Y2", &["Age", "Smoking", "BMI", "Diet", "Stress", "Noise", "Work", "Y2"], &[("Age", "Smoking"), ("Smoking", "Y2"), ("Diet", "Y2"), ("Stress", "Y2"), ("Noise", "Stress"), ("Work", "Stress"), ("BMI", "Y2")]),
    ];
    let s = build_supergraph(&graphs).unwrap();
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    for gr in &graphs {
        for n in &gr.nodes {
            *expected.entry(n.clone()).or_default() += 1;
        }
    }
    assert_eq!(s.layout.nodes.len(), expected.len());
    for (n, count) in expected {
        assert_eq!(s.membership[&n].len(), count, "{n}");
    }
}

#[test]
fn compression_preserves_rank_order_on_corpus() {
    let mut total = 0;
    for seed in 0..200 {
        let s = build_supergraph(&instance(seed)).unwrap();
        total += order_violations(&s);
    }
    assert_eq!(total, 0);
}

#[test]
fn compressed_stress_beats_extracted_on_corpus() {
    let (mut wins, mut count) = (0, 0);
    let mut reductions = Vec::new();
    for seed in 0..100 {
        let set = assemble_graphs(&instance(seed)).unwrap();
        for s in &set.stress {
            count += 1;
            if s.compressed <= s.extracted {
                wins += 1;
            }
            reductions.push(if s.extracted > 0.0 { (s.extracted - s.compressed) / s.extracted } else { 0.0 });
        }
    }
    reductions.sort_by(f64::total_cmp);
    let median = reductions[reductions.len() / 2];
    assert!(wins as f64 >= 0.9 * count as f64, "{wins}/{count}");
    assert!(median > 0.1, "median reduction {median}");
}

#[test]
fn svg_is_well_formed_and_lists_nodes_once() {
    let graphs = instance(3);
    let g = &graphs[0];
    let l = layout_graph(g).unwrap();
    let svg = to_svg(&SvgScene::new(&g.id, &l, [g.outcome.clone()], &[g]));
    let mut depth = 0i32;
    let mut rest = svg.as_str();
    while let Some(i) = rest.find('<') {
        let end = rest[i..].find('>').expect("closed tag") + i;
        let tag = &rest[i + 1..end];
        if tag.starts_with('/') {
            depth -= 1;
        } else if !tag.ends_with('/') {
            depth += 1;
        }
        assert!(depth >= 0);
        rest = &rest[end + 1..];
    }
    assert_eq!(depth, 0);
    for n in &g.nodes {
        assert_eq!(svg.matches(&format!("data-name=\"{n}\"")).count(), 1, "{n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layered_layout_invariants(seed in 0u64..10_000) {
        let (nodes, edges) = random_dag(seed);
        let l = layered_layout(&nodes, &edges).unwrap();
        let mut seen = BTreeSet::new();
        for p in l.nodes.values() {
            prop_assert!(seen.insert((p.rank, p.order)));
            prop_assert_eq!(p.y, p.rank as f64);
        }
        for row in l.rows() {
            for w in row.windows(2) {
                let (a, b) = (l.nodes[&w[0]], l.nodes[&w[1]]);
                prop_assert!(a.order < b.order && a.x < b.x);
            }
        }
        for e in &l.edges {
            prop_assert!(l.nodes[&e.from].rank < l.nodes[&e.to].rank);
            prop_assert!(!e.reversed);
        }
        prop_assert_eq!(layered_layout(&nodes, &edges).unwrap(), l);
    }

    #[test]
    fn anchored_nodes_are_unit_consecutive_and_shared(seed in 0u64..10_000) {
        let s = build_supergraph(&instance(seed)).unwrap();
        let c = compress(&s).unwrap();
        for (k, w) in c.anchors.windows(2).enumerate() {
            prop_assert!((w[1].1 - w[0].1 - 1.0).abs() < 1e-12, "gap {}", k);
        }
        for n in &c.anchored {
            let xs: Vec<f64> = c.subgraphs.values().filter_map(|l| l.nodes.get(n)).map(|p| p.x).collect();
            prop_assert!(xs.len() >= 2);
            prop_assert!(xs.iter().all(|x| *x == xs[0]));
            let col = c.anchors.iter().find(|a| a.0 == s.layout.nodes[n].x).unwrap();
            prop_assert_eq!(col.1, xs[0]);
        }
    }

    #[test]
    fn compression_is_idempotent_on_orders(seed in 0u64..10_000) {
        let s = build_supergraph(&instance(seed)).unwrap();
        let c = compress(&s).unwrap();
        let mut again = s.clone();
        for l in c.subgraphs.values() {
            for (n, p) in &l.nodes {
                again.layout.nodes.get_mut(n).unwrap().x = p.x;
            }
        }
        let c2 = compress(&again).unwrap();
        for (id, l) in &c.subgraphs {
            prop_assert_eq!(l.rows(), c2.subgraphs[id].rows());
        }
    }

    #[test]
    fn glyphs_follow_delta_and_thumbnails_fit(seed in 0u64..10_000) {
        let graphs = instance(seed);
        let set = assemble_graphs(&graphs).unwrap();
        for (id, gl) in &set.glyphs {
            for g in gl {
                prop_assert_eq!(g, &glyph(g.node.clone(), set.compressed.delta[id][&g.node]));
            }
        }
        for t in set.thumbnails.values() {
            for v in [t.x0, t.x1, t.y0, t.y1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(t.x0 <= t.x1 && t.y0 <= t.y1);
        }
        let slices: usize = set.palette.slices.values().map(Vec::len).sum();
        prop_assert_eq!(slices, graphs.iter().map(|g| g.nodes.len()).sum::<usize>());
        for s in &set.stress {
            prop_assert!(s.extracted.is_finite() && s.extracted >= 0.0);
            prop_assert!(s.compressed.is_finite() && s.compressed >= 0.0);
        }
    }

    #[test]
    fn extraction_partitions_nodes(seed in 0u64..10_000) {
        let s = build_supergraph(&instance(seed)).unwrap();
        let mut union = BTreeSet::new();
        for id in &s.graph_ids {
            let sub = extract_subgraph(&s, id).unwrap();
            for (n, p) in &sub.nodes {
                prop_assert_eq!(p.x, s.layout.nodes[n].x);
                union.insert(n.clone());
            }
            for e in &sub.edges {
                let owned = s.edges.iter().any(|r| r.from == e.from && r.to == e.to && r.owners.contains(id));
                prop_assert!(owned);
            }
        }
        prop_assert_eq!(union.len(), s.layout.nodes.len());
    }
}

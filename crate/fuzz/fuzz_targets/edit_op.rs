#![no_main]
use causeway_core::graph::{apply_edit, CausalGraph, EdgeSource, EditOp, GraphEdge};
use libfuzzer_sys::fuzz_target;

fn base() -> CausalGraph {
    let nodes = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let edges = vec![GraphEdge::directed("A", "B", EdgeSource::Pc), GraphEdge::directed("B", "C", EdgeSource::Pc), GraphEdge::undirected("C", "D", EdgeSource::Pc)];
    CausalGraph::new("g", "C", nodes, edges).unwrap()
}

fuzz_target!(|data: &[u8]| {
    let mut g = base();
    // A stream of newline-separated edits applied in sequence.
    for line in data.split(|b| *b == b'\n') {
        let Ok(op) = serde_json::from_slice::<EditOp>(line) else { continue };
        if let Ok(next) = apply_edit(&g, &op) {
            assert_eq!(next.version, g.version + 1);
            next.validate().expect("edits keep the graph valid");
            g = next;
        }
    }
});

#![no_main]
use causeway_core::graph::CausalGraph;
use causeway_core::layout::{layout_graph, to_dot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(g) = serde_json::from_slice::<CausalGraph>(data) else { return };
    g.validate().expect("deserialised graphs are valid");
    let again: CausalGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(again, g);
    if g.nodes.len() <= 64 && g.edges.len() <= 256 {
        if let Ok(l) = layout_graph(&g) {
            assert_eq!(l.nodes.len(), g.nodes.len());
        }
        let _ = to_dot(&g, None);
    }
});

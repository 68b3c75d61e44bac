#![no_main]
use std::collections::BTreeSet;

use causeway_core::metrics::{eval_metrics, PredictedEdges};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(pred) = serde_json::from_slice::<PredictedEdges>(data) else { return };
    let nodes: Vec<String> = ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect();
    let truth: BTreeSet<(String, String)> = [("A", "B"), ("B", "C"), ("A", "D")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let preds = vec![("x".to_string(), pred.clone()), ("y".to_string(), PredictedEdges::directed(truth.clone()))];
    if let Ok(report) = eval_metrics(&nodes, &preds, &truth) {
        for r in &report.rows {
            assert!((0.0..=1.0).contains(&r.accuracy) && (0.0..=1.0).contains(&r.fpr), "{r:?}");
        }
        let best = report.rows[..2].iter().map(|r| r.accuracy).fold(0.0, f64::max);
        assert!(report.row("union").unwrap().accuracy >= best);
    }
});

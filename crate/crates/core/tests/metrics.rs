use std::collections::BTreeSet;

use causeway_core::metrics::{eval_metrics, union, PredictedEdges};
use proptest::prelude::*;

fn nodes(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("n{i}")).collect()
}

/// Edge marks over a `d`-node graph: 0 absent, 1 forward, 2 backward,
/// 3 undirected.
fn prediction(d: usize, marks: &[u8]) -> PredictedEdges {
    let names = nodes(d);
    let mut p = PredictedEdges::default();
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            match marks[k] % 4 {
                1 => {
                    p.directed.insert((names[i].clone(), names[j].clone()));
                }
                2 => {
                    p.directed.insert((names[j].clone(), names[i].clone()));
                }
                3 => {
                    p.undirected.insert((names[i].clone(), names[j].clone()));
                }
                _ => {}
            }
            k += 1;
        }
    }
    p
}

fn truth(d: usize, marks: &[u8]) -> BTreeSet<(String, String)> {
    let names = nodes(d);
    let mut t = BTreeSet::new();
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            if marks[k] % 2 == 1 {
                t.insert((names[i].clone(), names[j].clone()));
            }
            k += 1;
        }
    }
    t
}

fn case() -> impl Strategy<Value = (usize, Vec<u8>, Vec<Vec<u8>>)> {
    (2usize..7).prop_flat_map(|d| {
        let m = d * (d - 1) / 2;
        (Just(d), prop::collection::vec(any::<u8>(), m), prop::collection::vec(prop::collection::vec(any::<u8>(), m), 2..4))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn union_accuracy_dominates((d, t, preds) in case()) {
        let truth = truth(d, &t);
        let named: Vec<(String, PredictedEdges)> = preds.iter().enumerate().map(|(k, m)| (format!("p{k}"), prediction(d, m))).collect();
        let report = eval_metrics(&nodes(d), &named, &truth).unwrap();
        let best = report.rows.iter().filter(|r| r.name != "union").map(|r| r.accuracy).fold(0.0, f64::max);
        let u = report.row("union").unwrap();
        prop_assert!(u.accuracy >= best);
        for r in &report.rows {
            prop_assert!((0.0..=1.0).contains(&r.accuracy) && (0.0..=1.0).contains(&r.fpr));
        }
        let all: Vec<&PredictedEdges> = named.iter().map(|(_, p)| p).collect();
        let skel: BTreeSet<_> = all.iter().flat_map(|p| p.skeleton()).collect();
        prop_assert_eq!(union(&all).skeleton(), skel);
    }

    #[test]
    fn perfect_directed_prediction_scores_zero((d, t, _) in case()) {
        let truth = truth(d, &t);
        let r = eval_metrics(&nodes(d), &[("p".into(), PredictedEdges::directed(truth.clone()))], &truth).unwrap();
        prop_assert_eq!(r.rows[0].hamming, 0);
        prop_assert_eq!(r.rows[0].accuracy, 1.0);
        prop_assert_eq!(r.rows[0].fpr, 0.0);
    }
}

use std::collections::BTreeMap;

use causeway_core::dataset::{load_csv, pairwise_summaries, pearson_correlations, top_n, MixedDataset, PairSummary, VariableKind};
use proptest::prelude::*;

/// Textbook two-pass Pearson in extended form.
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn csv_from(rows: &[Vec<String>], header: &[&str]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

#[test]
fn pearson_matches_closed_form() {
    let bytes = b"x,y\n1,2\n2,4\n3,7\n";
    let ds = load_csv(bytes, &BTreeMap::from([("x".to_string(), VariableKind::Continuous), ("y".to_string(), VariableKind::Continuous)])).unwrap();
    let r = pearson_correlations(&ds, "y").unwrap().entries[0].r;
    let expected = pearson_oracle(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]);
    assert!((expected - 0.993_399_267_798_783).abs() < 1e-12);
    assert!((r - expected).abs() < 1e-12, "{r}");
}

#[test]
fn correlations_exclude_outcome_and_rank_by_magnitude() {
    let bytes = b"a,b,c,y\n1.5,0.2,9.1,1.0\n2.5,0.1,3.3,2.1\n3.5,0.4,5.2,2.9\n4.5,0.3,1.0,4.2\n5.5,0.9,7.7,5.0\n";
    let ds = load_csv(bytes, &BTreeMap::new()).unwrap();
    let rep = pearson_correlations(&ds, "y").unwrap();
    assert!(rep.entries.iter().all(|e| e.variable != "y"));
    for w in rep.entries.windows(2) {
        assert!(w[0].r.abs() > w[1].r.abs() || (w[0].r.abs() == w[1].r.abs() && w[0].variable < w[1].variable));
    }
    assert_eq!(top_n(&rep, 1), vec!["a".to_string()]);
    assert_eq!(top_n(&rep, 10).len(), 3);
}

fn table_strategy() -> impl Strategy<Value = (Vec<Vec<String>>, usize)> {
    (3usize..40).prop_flat_map(|n| {
        let row = (0u8..3, 0u8..4, -50i32..50, -1000i32..1000).prop_map(|(a, b, c, d)| {
            vec![["lo", "mid", "hi"][a as usize].to_string(), b.to_string(), format!("{:.2}", c as f64 / 7.0), format!("{:.3}", d as f64 / 13.0)]
        });
        (prop::collection::vec(row, n), Just(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pearson_is_symmetric_and_bounded((rows, _) in table_strategy()) {
        let bytes = csv_from(&rows, &["g", "k", "u", "v"]);
        let Ok(ds) = load_csv(&bytes, &BTreeMap::new()) else { return Ok(()) };
        let names: Vec<String> = ds.variables().iter().map(|v| v.name.clone()).collect();
        let mut r = BTreeMap::new();
        for a in &names {
            for e in pearson_correlations(&ds, a).unwrap().entries {
                prop_assert!(e.r.abs() <= 1.0 + 1e-12);
                r.insert((a.clone(), e.variable.clone()), e.r);
            }
        }
        for ((a, b), v) in &r {
            prop_assert!((v - r[&(b.clone(), a.clone())]).abs() <= 1e-12);
        }
    }

    #[test]
    fn catcat_tables_sum_to_row_count((rows, _) in table_strategy()) {
        let bytes = csv_from(&rows, &["g", "k", "u", "v"]);
        let Ok(ds) = load_csv(&bytes, &BTreeMap::new()) else { return Ok(()) };
        let names: Vec<String> = ds.variables().iter().map(|v| v.name.clone()).collect();
        let m = pairwise_summaries(&ds, &names, 10).unwrap();
        for row in &m.cells {
            for cell in row {
                match cell {
                    PairSummary::CatCat { counts, .. } => {
                        prop_assert_eq!(counts.iter().flatten().sum::<u64>(), ds.row_count() as u64);
                    }
                    PairSummary::CatCont { groups, .. } => {
                        prop_assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), ds.row_count());
                        for g in groups {
                            if let Some(s) = &g.stats {
                                prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
                            }
                        }
                    }
                    PairSummary::ContCont { points, total, .. } => {
                        prop_assert!(points.len() <= 10);
                        prop_assert_eq!(*total, ds.row_count());
                    }
                }
            }
        }
    }

    #[test]
    fn inference_is_deterministic((rows, _) in table_strategy()) {
        let bytes = csv_from(&rows, &["g", "k", "u", "v"]);
        let a = load_csv(&bytes, &BTreeMap::new());
        let b = load_csv(&bytes, &BTreeMap::new());
        prop_assert_eq!(&a, &b);
        if let Ok(ds) = a {
            let json = serde_json::to_string(&ds).unwrap();
            let back: MixedDataset = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn loader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = load_csv(&bytes, &BTreeMap::new());
    }
}

#[test]
fn synthetic_data_roundtrips_through_csv() {
    use causeway_core::dataset::to_csv;
    use causeway_core::synth::{generate, SynthKind};
    for kind in [SynthKind::Chain, SynthKind::MixedSem, SynthKind::BinaryTreatment] {
        let s = generate(kind, 300, 5);
        let back = load_csv(&to_csv(&s.data), &BTreeMap::new()).unwrap();
        assert_eq!(back, s.data, "{kind:?}");
    }
}

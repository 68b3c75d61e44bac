#![no_main]
use std::collections::BTreeMap;

use causeway_core::dataset::{load_csv, pairwise_summaries, pearson_correlations};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = load_csv(data, &BTreeMap::new()) else { return };
    let names: Vec<String> = ds.variables().iter().map(|v| v.name.clone()).collect();
    for v in ds.variables() {
        assert_eq!(ds.column(ds.index_of(&v.name).unwrap()).len(), ds.row_count());
    }
    if let Some(first) = names.first() {
        if let Ok(rep) = pearson_correlations(&ds, first) {
            assert!(rep.entries.iter().all(|e| e.r.is_nan() || e.r.abs() <= 1.0 + 1e-9));
        }
    }
    let _ = pairwise_summaries(&ds, &names, 16);
});

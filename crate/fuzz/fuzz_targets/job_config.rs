#![no_main]
use causeway_core::discovery::{overlays, DiscoverySnapshot, JobConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<JobConfig>(data) {
        let _ = cfg.validate();
        let again: JobConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again.variables, cfg.variables);
    }
    if let Ok(snap) = serde_json::from_slice::<DiscoverySnapshot>(data) {
        let _ = overlays(&snap);
    }
});

pub mod comparison;
pub mod dataset;
pub mod discovery;
pub mod effects;
pub mod graph;
pub mod layout;
pub mod metrics;
pub mod stats;
pub mod synth;

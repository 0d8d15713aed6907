//! Shared setup for the pipeline benchmarks: bundled example systems.

use std::path::{Path, PathBuf};

use sparsefb_core::config::SystemConfig;
use sparsefb_core::model::{LtiSystem, SynthesisSpec};

pub fn load_example(name: &str) -> (LtiSystem, SynthesisSpec) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"));
    let config = SystemConfig::load(path).expect("bundled config loads");
    (
        config.system().expect("system builds"),
        config.synthesis_spec().expect("spec builds"),
    )
}

//! Input fixtures shared by the benchmarks.

use hqkd_core::pipeline;
use hqkd_core::postproc::ldpc::flip_bits;
use hqkd_core::{PipelineConfig, SiftConfig, TagStream};

/// Herald and Bob streams of a default-config acquisition.
pub fn acquisition(duration_s: f64) -> (TagStream, TagStream, SiftConfig) {
    let cfg = PipelineConfig {
        duration_s,
        ..PipelineConfig::default()
    };
    let sim = pipeline::simulate(&cfg).expect("default config simulates");
    (sim.herald, sim.bob, cfg.sift_config())
}

/// A uniformly random block and a copy with each bit flipped with probability `q`.
pub fn noisy_pair(n: usize, q: f64, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let alice = flip_bits(&vec![0; n], 0.5, seed);
    let bob = flip_bits(&alice, q, seed ^ 0x9e37_79b9);
    (alice, bob)
}

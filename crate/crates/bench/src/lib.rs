//! Criterion benchmarks for the `isa-core` kernels. The fixtures here are
//! shared by the bench targets.

use isa_core::{build_landscape, corpus_potential, Landscape, LandscapeOptions, TemperaturePair};

/// The tilted double well, normalized.
pub fn tilted_landscape() -> Landscape {
    build_landscape(corpus_potential("tilted_double_well").expect("corpus entry"), &LandscapeOptions::default())
        .expect("tilted double well has a barrier")
}

/// `tau1 = 0.15`, `tau2 = 0.45`.
pub fn bench_temperatures() -> TemperaturePair {
    TemperaturePair::new(0.15, 0.45).expect("ordered temperatures")
}

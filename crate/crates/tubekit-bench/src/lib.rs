//! Shared fixtures for the criterion benchmarks.

use tubekit_core::constructions::standard_configuration;
use tubekit_core::tube::TubeFamily;
use tubekit_core::voxel::VoxelSet;

pub fn bench_family(delta: f64) -> TubeFamily {
    standard_configuration(2, delta, &[0.0, 0.0]).expect("bench family")
}

pub fn bench_disk(h: f64) -> VoxelSet {
    let pad = 3.0 * h;
    VoxelSet::from_fn(&[-1.0 - pad, -1.0 - pad], &[1.0 + pad, 1.0 + pad], h, |c| {
        c[0] * c[0] + c[1] * c[1] <= 1.0
    })
    .expect("bench disk")
}

//! Shared fixtures for the benchmarks.

use hrmsbo_core::rng::stream;
use hrmsbo_core::space::unit_latin_hypercube;
use hrmsbo_core::Dataset;
use rand::Rng;

/// Noisy smooth data on a Latin hypercube in the unit cube.
pub fn toy_dataset(dims: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, &[]);
    let x = unit_latin_hypercube(dims, n, &mut rng).expect("valid design").into_points();
    let f = x
        .iter()
        .map(|p| p.iter().map(|v| (6.0 * v).sin()).sum::<f64>() + 0.1 * rng.random::<f64>())
        .collect();
    Dataset::from_rows(dims, x, f).expect("consistent rows")
}

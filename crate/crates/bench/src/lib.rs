//! Fixed inputs shared by the benchmarks.

use levytree::rng::rng_from_seed;
use levytree::snake::ExcursionSource;
use levytree::pathsim::ReflectedHeight;

/// A reproducible excursion of the reflected height process reaching `min_height`.
pub fn fixture_excursion(dt: f64, min_height: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let mut src = ExcursionSource::new(ReflectedHeight::new(1.0, dt).expect("valid dt"));
    let (e, _) = levytree::snake::sample_tall_excursion(&mut src, min_height, 5_000_000, &mut rng);
    (e.heights, e.step_min)
}

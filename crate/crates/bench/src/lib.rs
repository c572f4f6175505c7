//! Shared fixtures for the benchmarks in `benches/`.

use edpls::{simulate_two_holders, Dataset, RngStream};

/// Both simulated holders stacked: `2 * n` samples over `m` channels.
pub fn simulated(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 1);
    simulate_two_holders(n, m, &mut rng)
        .expect("valid simulation sizes")
        .combined()
}

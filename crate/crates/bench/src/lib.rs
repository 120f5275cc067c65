//! Shared fixtures for the criterion benchmarks.

use sfbreak::sampling::simulate_dataset;
use sfbreak::{Dataset, Theta};

pub fn reference_theta() -> Theta {
    Theta::new(vec![1.0, 0.5], 0.5, 0.3, 0.6).expect("valid parameters")
}

pub fn synthetic(n: usize, seed: u64) -> Dataset {
    simulate_dataset(&reference_theta(), n, seed).expect("simulation succeeds")
}

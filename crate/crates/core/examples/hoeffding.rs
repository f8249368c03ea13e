//! Demonstration budget from the Hoeffding bound
//! `n >= ln(2/δ) / (2ε²)` and the effect of an efficiency factor.

use hilsynth::training::{hoeffding_min_samples, with_efficiency};

fn main() {
    println!("  eps  delta      n   n/4");
    for (eps, delta) in [(0.1, 0.05), (0.05, 0.05), (0.05, 0.01), (0.02, 0.01), (0.01, 0.001)] {
        let n = hoeffding_min_samples(eps, delta).unwrap();
        println!("{eps:5} {delta:6} {n:6} {:5}", with_efficiency(n, 4.0).unwrap());
    }
}

//! Writes the randomization-vs-memory POMDP in the JSON model format and
//! reads it back.
//!
//!     cargo run --example model_file > model.json

use hilsynth::fixtures::randomization_vs_memory;
use hilsynth::format::{read_pomdp, write_pomdp};

fn main() {
    let pomdp = randomization_vs_memory();
    let text = write_pomdp(&pomdp);
    let back = read_pomdp(&text).expect("round trip");
    assert_eq!(back, pomdp);
    eprintln!(
        "{} states, {} observations, {} transitions",
        pomdp.num_states(),
        pomdp.num_observations(),
        pomdp.mdp().num_transitions()
    );
    print!("{text}");
}

//! Decide the property on a hand-written system at two measurement
//! precisions, and show the witness run when it fails.
//!
//! The fixture is two parallel chains whose outputs differ by roughly 0.2
//! at every depth. With delta = 0.2 the intruder can split the chains
//! after one step; with delta = 0.25 they stay confused forever.

use preopacity::{verify_preopacity, MetricSystem};

fn main() {
    let sys = MetricSystem::from_json(include_str!("../fixtures/two_chain.json")).unwrap();
    println!(
        "system: {} states, {} inputs, {} transitions",
        sys.state_count(),
        sys.input_count(),
        sys.transition_count()
    );

    for delta in [0.2, 0.25] {
        for k in [0u32, 1, 3] {
            let verdict = verify_preopacity(&sys, delta, k).unwrap();
            println!(
                "delta = {delta:<4} K = {k}: {}",
                if verdict.holds { "holds" } else { "VIOLATED" }
            );
            if !verdict.holds {
                let narrative = preopacity::verify::extract_witness(&sys, &verdict).unwrap();
                for line in narrative.lines() {
                    println!("    {line}");
                }
            }
        }
    }
}

//! Differential testing in miniature: the estimator-based decision against
//! the from-the-definition enumeration, across a batch of small random
//! non-blocking systems.

use preopacity::oracle::{oracle_verify, OracleQuery};
use preopacity::{build_observer, random_system, verdict_from_observer, RandomSystemConfig};

fn main() {
    let config = RandomSystemConfig::default();
    let mut checked = 0;
    let mut violated = 0;
    for seed in 0..40u64 {
        let sys = random_system(&config, seed);
        for delta in [0.0, 0.5] {
            for k in [0u32, 1, 2] {
                let observer = build_observer(&sys, delta).unwrap();
                let fast = verdict_from_observer(&sys, &observer, k);
                // horizon: one lap of the estimator product plus the lookahead
                let horizon = observer.node_count() + k as usize;
                let query = OracleQuery::new(delta, k, horizon).unwrap();
                let slow = oracle_verify(&sys, &query).unwrap();
                assert_eq!(
                    fast.holds, slow.holds,
                    "disagreement on seed {seed}, delta {delta}, K {k}"
                );
                checked += 1;
                if !fast.holds {
                    violated += 1;
                }
            }
        }
    }
    println!("agreement on {checked} queries ({violated} violated, {} held)", checked - violated);
}

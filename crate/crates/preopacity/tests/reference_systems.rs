//! Frozen expectations for the hand-built fixture systems. Every number
//! here was derived by hand from the fixture files (chain structure,
//! output spacing, certainty sets) before being frozen, so a drift in any
//! module shows up as a divergence from an independently known value.

use preopacity::{
    backward_operator, check_relation, estimate_of_run, indicator, max_akp_relation,
    verify_preopacity, MetricSystem, RelationPairs, Run,
};
use std::collections::BTreeSet;

fn two_chain() -> MetricSystem {
    MetricSystem::from_json(include_str!("../fixtures/two_chain.json")).unwrap()
}

fn ids(members: &BTreeSet<String>) -> Vec<&str> {
    members.iter().map(String::as_str).collect()
}

// Two parallel chains, A -> B -> C -> D and E -> F -> G -> H, with secrets
// C and H sitting at different depths. Outputs along the chains differ by
// 0.1 to 0.2 per rung, so delta slides the intruder's confusion window
// across rungs.
#[test]
fn two_chain_certainty_sets() {
    let sys = two_chain();
    let t: Vec<BTreeSet<String>> = (0..5).map(|n| indicator(&sys, n).members).collect();
    assert_eq!(ids(&t[0]), ["C", "H"]);
    assert_eq!(ids(&t[1]), ["B", "G", "H"]);
    assert_eq!(ids(&t[2]), ["A", "F", "G", "H"]);
    assert_eq!(ids(&t[3]), ["E", "F", "G", "H"]);
    assert_eq!(t[4], t[3], "the chain reaches its fixed point at n = 3");
    for n in 0..4u32 {
        assert_eq!(
            backward_operator(&sys, &t[n as usize]).unwrap(),
            t[n as usize + 1]
        );
    }
}

#[test]
fn two_chain_verdict_table() {
    let sys = two_chain();
    // outputs 0.1 apart within a rung pair, 0.2 across; the f64 gaps of
    // the decimal literals make 0.2 sit just below |2.9 - 3.1| and
    // |4.0 - 4.2|, so delta = 0.2 still separates the chains at the lower
    // rungs and the system stays revealed
    for delta in [0.0, 0.19, 0.2] {
        for k in [0u32, 1, 3] {
            let v = verify_preopacity(&sys, delta, k).unwrap();
            assert!(!v.holds, "expected VIOLATED at delta = {delta}, K = {k}");
            assert_eq!(v.observer_nodes, 8);
        }
    }
    // at 0.25 every adjacent rung pair blurs and no estimate ever commits
    for k in [0u32, 1, 3] {
        let v = verify_preopacity(&sys, 0.25, k).unwrap();
        assert!(v.holds, "expected HOLDS at delta = 0.25, K = {k}");
        assert_eq!(v.observer_nodes, 8);
        assert!(v.witness.is_none());
    }
}

#[test]
fn two_chain_witness_runs() {
    let sys = two_chain();
    // K = 0: the estimate collapses to the secret C at the end of A, B, C
    let v = verify_preopacity(&sys, 0.2, 0).unwrap();
    let steps = v.witness.unwrap();
    let states: Vec<&str> = steps.iter().map(|s| s.state.as_str()).collect();
    assert_eq!(states, ["A", "B", "C"]);
    assert_eq!(steps[2].estimate, ["C"]);

    // K = 1: the estimate pins G, whose only continuation is the secret H
    let v = verify_preopacity(&sys, 0.2, 1).unwrap();
    let steps = v.witness.unwrap();
    let states: Vec<&str> = steps.iter().map(|s| s.state.as_str()).collect();
    assert_eq!(states, ["E", "F", "G"]);
    assert_eq!(steps[2].estimate, ["G"]);
}

#[test]
fn two_chain_estimates_track_the_confusion_window() {
    let sys = two_chain();
    let start = Run::new(vec!["A".to_string()], vec![]).unwrap();
    // |1.1 - 1.2| rounds below 0.1 in f64, so A and E blur already at 0.1
    assert_eq!(estimate_of_run(&sys, 0.05, &start).unwrap(), ["A"]);
    assert_eq!(estimate_of_run(&sys, 0.1, &start).unwrap(), ["A", "E"]);

    let a_b = Run::of(&["A", "u", "B"]).unwrap();
    assert_eq!(estimate_of_run(&sys, 0.19, &a_b).unwrap(), ["B"]);
    assert_eq!(estimate_of_run(&sys, 0.2, &a_b).unwrap(), ["B", "F"]);
}

// The chain pair: a four-state detailed line related to a collapsed
// summary whose outputs sit within 0.05 or 0.1 of their counterparts.
#[test]
fn chain_pair_greatest_relation_is_the_designed_one() {
    let detailed = MetricSystem::from_json(include_str!("../fixtures/chain_pair_a.json")).unwrap();
    let aggregated =
        MetricSystem::from_json(include_str!("../fixtures/chain_pair_b.json")).unwrap();

    let result = max_akp_relation(&detailed, &aggregated, 0.1).unwrap();
    assert!(result.related);
    let designed = RelationPairs::from_pairs([
        ("A", "L"),
        ("B", "I"),
        ("C", "I"),
        ("D", "I"),
        ("E", "J"),
        ("F", "J"),
        ("G", "J"),
        ("H", "K"),
    ]);
    assert_eq!(result.relation, designed);
    assert!(check_relation(&detailed, &aggregated, 0.1, &designed)
        .unwrap()
        .is_empty());
}

#[test]
fn chain_pair_relation_degrades_predictably() {
    let detailed = MetricSystem::from_json(include_str!("../fixtures/chain_pair_a.json")).unwrap();
    let aggregated =
        MetricSystem::from_json(include_str!("../fixtures/chain_pair_b.json")).unwrap();

    // dropping the secret pair (H, K) orphans the H and K successors of
    // the E/F/G rows: each loses its forward and its backward match
    let crippled = RelationPairs::from_pairs([
        ("A", "L"),
        ("B", "I"),
        ("C", "I"),
        ("D", "I"),
        ("E", "J"),
        ("F", "J"),
        ("G", "J"),
    ]);
    let violations = check_relation(&detailed, &aggregated, 0.1, &crippled).unwrap();
    assert_eq!(violations.len(), 6);
    let conditions: Vec<String> = violations.iter().map(|v| v.condition().to_string()).collect();
    assert_eq!(conditions.iter().filter(|c| *c == "3a").count(), 3);
    assert_eq!(conditions.iter().filter(|c| *c == "3b").count(), 3);

    // at epsilon = 0.01 not even the initial states can be matched
    let result = max_akp_relation(&detailed, &aggregated, 0.01).unwrap();
    assert!(!result.related);
    let failure = result.failure.unwrap();
    assert_eq!(failure.condition.to_string(), "1a");
    assert_eq!(failure.state, "A");
}

// A system whose initial state is itself secret is revealed by the empty
// observation: the shortest witness has a single step
#[test]
fn initially_secret_state_yields_a_length_zero_witness() {
    let sys =
        MetricSystem::from_json(include_str!("../fixtures/immediate_reveal.json")).unwrap();
    let v = verify_preopacity(&sys, 0.0, 0).unwrap();
    assert!(!v.holds);
    assert_eq!(v.observer_nodes, 2);
    let steps = v.witness.unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].state, "s");
    assert_eq!(steps[0].input, None);
    assert_eq!(steps[0].estimate, ["s"]);

    // one step of lookahead saves it: T_1 is empty because s's successor
    // t is public and loops
    assert!(verify_preopacity(&sys, 0.0, 1).unwrap().holds);
    assert!(indicator(&sys, 1).members.is_empty());
}

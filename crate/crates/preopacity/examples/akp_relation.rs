//! Compute the greatest property-preserving simulation relation between a
//! detailed system and an aggregated one, check a hand-written relation,
//! and show the precision transfer it buys.

use preopacity::{check_relation, max_akp_relation, transfer_verdict, MetricSystem, RelationPairs};

fn main() {
    let detailed =
        MetricSystem::from_json(include_str!("../fixtures/chain_pair_a.json")).unwrap();
    let aggregated =
        MetricSystem::from_json(include_str!("../fixtures/chain_pair_b.json")).unwrap();
    let epsilon = 0.1;

    let result = max_akp_relation(&detailed, &aggregated, epsilon).unwrap();
    println!(
        "greatest relation at epsilon = {epsilon}: related = {}, {} pairs",
        result.related,
        result.relation.len()
    );
    for (a, b) in result.relation.iter() {
        println!("  {a} ~ {b}");
    }

    // an explicitly given relation is checked condition by condition
    let given =
        RelationPairs::from_json(include_str!("../fixtures/chain_pair_relation.json")).unwrap();
    let violations = check_relation(&detailed, &aggregated, epsilon, &given).unwrap();
    println!("hand-written relation: {} violation(s)", violations.len());

    // dropping a pair breaks the step conditions, visibly
    let broken = RelationPairs::from_pairs(
        given
            .iter()
            .filter(|(a, _)| a.as_str() != "H")
            .map(|(a, b)| (a.to_string(), b.to_string())),
    );
    let violations = check_relation(&detailed, &aggregated, epsilon, &broken).unwrap();
    println!("after dropping (H, K): {} violation(s)", violations.len());
    for v in violations.iter().take(4) {
        println!("  {v}");
    }

    // what the relation is for: a verdict at delta on the aggregated side
    // covers the detailed side at delta + 2*epsilon
    let delta_b = 0.0;
    println!(
        "verdict transfer: delta = {delta_b} there implies delta = {} here",
        transfer_verdict(delta_b, epsilon).unwrap()
    );
}

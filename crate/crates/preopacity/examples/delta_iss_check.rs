//! Sanity-check a declared contraction certificate by simulation: sample
//! trajectory pairs and test the incremental-stability bound at every step.
//! A sound certificate produces zero violations; a fabricated one is caught
//! within a few samples.

use preopacity::{check_delta_iss_empirical, ControlSystemSpec};
use preopacity::abstraction::simulate;

fn main() {
    let spec =
        ControlSystemSpec::from_json(include_str!("../fixtures/cosine_contraction.json")).unwrap();

    // a short trajectory from the top of the state set
    let t = simulate(&spec, &[11.0], &[vec![0.05], vec![0.05], vec![0.05]]).unwrap();
    let states: Vec<String> = t.states.iter().map(|x| format!("{:.4}", x[0])).collect();
    println!("trajectory from 11.0: {}", states.join(" -> "));

    let report = check_delta_iss_empirical(&spec, 1000, 10, 20260817).unwrap();
    println!(
        "certificate check: {} samples, horizon {}, {} comparisons, {} violations",
        report.samples,
        report.horizon,
        report.comparisons,
        report.violations.len()
    );

    // break the certificate on purpose: claim the dynamics contract ten
    // times faster than they do
    let text = include_str!("../fixtures/cosine_contraction.json")
        .replace("\"lambda\": 0.2", "\"lambda\": 0.02")
        .replace("\"c\": 2.0", "\"c\": 0.02");
    let fake = ControlSystemSpec::from_json(&text).unwrap();
    let report = check_delta_iss_empirical(&fake, 50, 10, 20260817).unwrap();
    println!(
        "fabricated certificate: {} violations in 50 samples (first at sample {}, step {})",
        report.violations.len(),
        report.violations[0].sample,
        report.violations[0].step
    );
}

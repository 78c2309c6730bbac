//! Discretize the contractive example system into its 12-state abstraction
//! and inspect what came out: states, transitions, output classes, secrets.

use preopacity::{build_abstraction, ControlSystemSpec, QuantizationParams, SecretMode};

fn main() {
    let spec =
        ControlSystemSpec::from_json(include_str!("../fixtures/cosine_contraction.json")).unwrap();
    let params = QuantizationParams {
        eta: 1.0,
        mu: 0.0,
        theta: 2.3,
    };
    let built = build_abstraction(&spec, &params, 0.4, SecretMode::Cell).unwrap();
    print!("{}", built.report.render());

    let sys = &built.system;
    println!("\nper-state view:");
    for s in &sys.decl().states {
        let succ = sys.successors(&s.id, "0.05").unwrap();
        let succ: Vec<&str> = succ.iter().map(|s| s.as_str()).collect();
        println!(
            "  x = {:>2}  h = {:<13} {}-> {{{}}}",
            s.id,
            s.output.to_string(),
            if s.secret { "secret " } else { "" },
            succ.join(", ")
        );
    }

    // the same spacing with point-marked secrets drops the boundary cell
    let point = build_abstraction(&spec, &params, 0.4, SecretMode::Point).unwrap();
    println!(
        "\npoint-mode secrets: {{{}}}",
        point.report.secret_states.join(", ")
    );
}

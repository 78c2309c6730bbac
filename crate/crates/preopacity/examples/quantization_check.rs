//! Evaluate the quantization inequalities that gate abstraction soundness,
//! on a grid that passes and one that is slightly too coarse.

use preopacity::{check_quantization, ControlSystemSpec, QuantizationParams};

fn main() {
    let spec =
        ControlSystemSpec::from_json(include_str!("../fixtures/cosine_contraction.json")).unwrap();
    let epsilon = 0.4;

    for eta in [1.0, 1.1] {
        let params = QuantizationParams {
            eta,
            mu: 0.0,
            theta: 2.3,
        };
        let report = check_quantization(&spec, &params, epsilon).unwrap();
        println!("=== eta = {eta} ===");
        print!("{}", report.render());
        match report.first_failure() {
            None => println!("-> abstraction at this resolution carries the guarantee\n"),
            Some(c) => println!(
                "-> refused: '{}' needs {} <= {}\n",
                c.name, c.lhs, c.rhs
            ),
        }
    }
}

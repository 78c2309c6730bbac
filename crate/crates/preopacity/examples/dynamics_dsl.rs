//! The little expression language used for dynamics and output maps, and
//! the comparison-function kinds used for contraction certificates.

use preopacity::dsl::ComparisonFunction;
use preopacity::parse_expression;

fn main() {
    // state variables are x1..xn, inputs u1..um; pi is built in
    let f = parse_expression("0.2*x1 + u1", 1, 1).unwrap();
    let h = parse_expression("abs(cos(0.1*pi*x1))", 1, 0).unwrap();
    println!("dynamics: {f}");
    println!("output:   {h}");
    for x in [0.0, 5.0, 11.0] {
        println!(
            "  x = {x:>4}: f(x, 0.05) = {:<6} h(x) = {:.9}",
            f.evaluate(&[x], &[0.05]).unwrap(),
            h.evaluate(&[x], &[]).unwrap()
        );
    }

    // parse errors carry positions
    let err = parse_expression("0.2**", 1, 1).unwrap_err();
    println!("parse failure: {err}");

    // certificate pieces: a K-infinity lower bound on the output map and a
    // KL contraction rate
    let alpha = ComparisonFunction::linear(0.1 * std::f64::consts::PI).unwrap();
    let beta = ComparisonFunction::kl_exp_linear(1.0, 0.2).unwrap();
    let eps = 0.4;
    let r = alpha.alpha_inverse(eps).unwrap();
    println!("alpha_inverse({eps}) = {r}");
    for k in 0..4 {
        println!("  beta({r:.6}, {k}) = {:.9}", beta.eval_beta(r, k).unwrap());
    }
}

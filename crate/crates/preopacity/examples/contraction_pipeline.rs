//! The full route from a continuous control system to a concrete secrecy
//! guarantee: grid it, decide the property on the finite model, transfer.

use preopacity::{
    run_pipeline, ControlSystemSpec, PipelineConfig, QuantizationParams, SecretMode,
};

fn main() {
    let spec =
        ControlSystemSpec::from_json(include_str!("../fixtures/cosine_contraction.json")).unwrap();
    let cfg = PipelineConfig {
        params: QuantizationParams {
            eta: 1.0,
            mu: 0.0,
            theta: 2.3,
        },
        epsilon: 0.4,
        delta: 0.0,
        k: 0,
        mode: SecretMode::Cell,
    };
    let out = run_pipeline(&spec, &cfg).unwrap();
    print!("{}", out.report.render());
    println!(
        "\nestimator graph: {} nodes, {} edges",
        out.observer.node_count(),
        out.observer.edge_count()
    );
    println!("report as JSON:\n{}", out.report.to_json());
}

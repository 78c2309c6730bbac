//! Build the intruder's estimator graph for a system and render it as
//! Graphviz DOT (pipe into `dot -Tsvg` to draw it).

use preopacity::{build_observer, observer_dot, system_dot, MetricSystem};

fn main() {
    let sys = MetricSystem::from_json(include_str!("../fixtures/two_chain.json")).unwrap();
    let delta = 0.25;
    let observer = build_observer(&sys, delta).unwrap();
    eprintln!(
        "observer at delta = {delta}: {} nodes, {} edges (system has {} states)",
        observer.node_count(),
        observer.edge_count(),
        sys.state_count()
    );
    // the system graph goes to stderr commentary, the observer to stdout
    eprintln!("--- system ---");
    eprint!("{}", system_dot(&sys));
    print!("{}", observer_dot(&sys, &observer));
}

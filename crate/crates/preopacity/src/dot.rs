//! Graphviz DOT rendering for systems and their estimator graphs.
//!
//! Output is deterministic: states in identifier order, transitions in
//! (from, input, to) order, estimator nodes in discovery order. Secret
//! states are filled, initial states double-circled.

use crate::estimator::Observer;
use crate::model::MetricSystem;

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// The transition system itself: one node per state (label shows the
/// output), one edge per transition (label shows the input).
pub fn system_dot(sys: &MetricSystem) -> String {
    let decl = sys.decl();
    let mut out = String::from("digraph system {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=ellipse];\n");

    let mut states: Vec<_> = decl.states.iter().collect();
    states.sort_by(|a, b| a.id.cmp(&b.id));
    for s in &states {
        let label = format!("{}\n{}", s.id, s.output);
        let mut attrs = vec![format!("label={}", quoted(&label))];
        if s.secret {
            attrs.push("style=filled".to_string());
            attrs.push("fillcolor=gray85".to_string());
        }
        if s.initial {
            attrs.push("peripheries=2".to_string());
        }
        out.push_str(&format!("  {} [{}];\n", quoted(&s.id), attrs.join(", ")));
    }

    let mut edges: Vec<(&str, &str, &str)> = decl
        .transitions
        .iter()
        .map(|t| (t.from.as_str(), t.input.as_str(), t.to.as_str()))
        .collect();
    edges.sort();
    edges.dedup();
    for (from, input, to) in edges {
        out.push_str(&format!(
            "  {} -> {} [label={}];\n",
            quoted(from),
            quoted(to),
            quoted(input)
        ));
    }
    out.push_str("}\n");
    out
}

/// The estimator graph: nodes are (state, estimate) pairs labelled
/// `state | {estimate}`, edges carry the input. Initial nodes are
/// double-circled; nodes whose estimate is all-secret are filled, since
/// those are the moments the intruder knows the current state is secret.
pub fn observer_dot(sys: &MetricSystem, observer: &Observer) -> String {
    let mut out = String::from("digraph observer {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box];\n");
    let initial: std::collections::BTreeSet<u32> =
        observer.initial_node_indices().iter().copied().collect();
    for i in 0..observer.node_count() {
        let node = observer.node(i);
        let label = format!(
            "{} | {{{}}}",
            node.state_id(sys),
            node.estimate_ids(sys).join(", ")
        );
        let mut attrs = vec![format!("label={}", quoted(&label))];
        if initial.contains(&(i as u32)) {
            attrs.push("peripheries=2".to_string());
        }
        if node
            .estimate_ids(sys)
            .iter()
            .all(|id| sys.decl().states.iter().any(|s| s.id == *id && s.secret))
        {
            attrs.push("style=filled".to_string());
            attrs.push("fillcolor=gray85".to_string());
        }
        out.push_str(&format!("  n{i} [{}];\n", attrs.join(", ")));
    }
    for (from, input, to) in observer.edges() {
        out.push_str(&format!(
            "  n{from} -> n{to} [label={}];\n",
            quoted(sys.input_id(input))
        ));
    }
    out.push_str("}\n");
    out
}

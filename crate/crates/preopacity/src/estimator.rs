//! δ-approximate current-state estimation.
//!
//! An intruder observes the output sequence of a run up to measurement
//! precision δ and maintains the set of states the system could currently
//! be in. The estimator product tracks, for each actual state `x`, that
//! estimate `q` — a set of states whose runs produce outputs within δ of
//! the observed ones at every step. Pairing `x` with `q` gives a finite
//! graph (the observer) whose reachable nodes are exactly the
//! (state, estimate) situations the system can get into.

use crate::model::{MetricSystem, ValidationReport};
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

/// One observer node: the actual current state paired with the intruder's
/// current estimate. The estimate always contains the actual state and is
/// never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EstimatorState {
    pub(crate) state: u32,
    pub(crate) estimate: Arc<[u32]>,
}

impl EstimatorState {
    pub fn state_id<'a>(&self, sys: &'a MetricSystem) -> &'a str {
        sys.state_id(self.state)
    }

    /// Estimate members as identifiers, sorted.
    pub fn estimate_ids(&self, sys: &MetricSystem) -> Vec<String> {
        sys.ids_of(&self.estimate)
    }

    pub fn estimate_len(&self) -> usize {
        self.estimate.len()
    }

    #[cfg(test)]
    pub(crate) fn contains(&self, x: u32) -> bool {
        self.estimate.binary_search(&x).is_ok()
    }
}

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("delta must be a non-negative finite real, got {0}")]
    InvalidDelta(f64),
    #[error("system fails validation: {0}")]
    InvalidSystem(String),
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("unknown input '{0}'")]
    UnknownInput(String),
    #[error("no transition from '{from}' to '{to}' under input '{input}'")]
    NoSuchTransition {
        from: String,
        input: String,
        to: String,
    },
    #[error("run is malformed: {0}")]
    MalformedRun(String),
    #[error("run starts in '{0}', which is not an initial state")]
    RunNotInitial(String),
}

fn validation_summary(report: &ValidationReport) -> String {
    report
        .errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn require_clean(sys: &MetricSystem) -> Result<(), EstimatorError> {
    let report = sys.validate();
    if !report.is_clean() {
        return Err(EstimatorError::InvalidSystem(validation_summary(&report)));
    }
    Ok(())
}

fn require_delta(delta: f64) -> Result<(), EstimatorError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(EstimatorError::InvalidDelta(delta));
    }
    Ok(())
}

/// A finite run: alternating states and inputs, `states.len() == inputs.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
}

impl Run {
    pub fn new(states: Vec<String>, inputs: Vec<String>) -> Result<Run, EstimatorError> {
        if states.is_empty() || states.len() != inputs.len() + 1 {
            return Err(EstimatorError::MalformedRun(format!(
                "need n+1 states for n inputs, got {} states and {} inputs",
                states.len(),
                inputs.len()
            )));
        }
        Ok(Run { states, inputs })
    }

    /// `Run::of(&["9", "0.05", "2"])` — states and inputs interleaved.
    pub fn of(alternating: &[&str]) -> Result<Run, EstimatorError> {
        if alternating.len() % 2 == 0 {
            return Err(EstimatorError::MalformedRun(
                "interleaved run must have odd length".to_string(),
            ));
        }
        let states = alternating.iter().step_by(2).map(|s| s.to_string()).collect();
        let inputs = alternating
            .iter()
            .skip(1)
            .step_by(2)
            .map(|s| s.to_string())
            .collect();
        Run::new(states, inputs)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Resolves the run against a system, checking that it starts initial
    /// and that every step is an actual transition.
    pub(crate) fn resolve(&self, sys: &MetricSystem) -> Result<(Vec<u32>, Vec<u32>), EstimatorError> {
        let mut states = Vec::with_capacity(self.states.len());
        for s in &self.states {
            states.push(
                sys.index_of_state(s)
                    .map_err(|_| EstimatorError::UnknownState(s.clone()))?,
            );
        }
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for u in &self.inputs {
            inputs.push(
                sys.index_of_input(u)
                    .map_err(|_| EstimatorError::UnknownInput(u.clone()))?,
            );
        }
        if !sys.is_initial(states[0]) {
            return Err(EstimatorError::RunNotInitial(self.states[0].clone()));
        }
        for i in 0..inputs.len() {
            if !sys
                .successor_indices(states[i], inputs[i])
                .contains(&states[i + 1])
            {
                return Err(EstimatorError::NoSuchTransition {
                    from: self.states[i].clone(),
                    input: self.inputs[i].clone(),
                    to: self.states[i + 1].clone(),
                });
            }
        }
        Ok((states, inputs))
    }
}

/// Interns sorted estimate vectors so equal estimates share one allocation
/// and compare by pointer.
#[derive(Default)]
pub(crate) struct EstimateTable {
    by_content: HashMap<Vec<u32>, u32>,
    arcs: Vec<Arc<[u32]>>,
}

impl EstimateTable {
    pub(crate) fn intern(&mut self, mut members: Vec<u32>) -> (u32, Arc<[u32]>) {
        members.sort_unstable();
        members.dedup();
        if let Some(&id) = self.by_content.get(&members) {
            return (id, Arc::clone(&self.arcs[id as usize]));
        }
        let id = self.arcs.len() as u32;
        let arc: Arc<[u32]> = members.clone().into();
        self.by_content.insert(members, id);
        self.arcs.push(Arc::clone(&arc));
        (id, arc)
    }

    pub(crate) fn get(&self, id: u32) -> &Arc<[u32]> {
        &self.arcs[id as usize]
    }
}

/// The estimator product of a system at precision δ: all reachable
/// (state, estimate) nodes and the transitions between them. Nodes are
/// numbered in breadth-first discovery order with states and inputs visited
/// in identifier order, which makes every derived artifact (witnesses, DOT
/// output, node counts) deterministic.
pub struct Observer {
    pub(crate) delta: f64,
    pub(crate) nodes: Vec<(u32, u32)>, // (state, estimate id)
    pub(crate) table: EstimateTable,
    pub(crate) initial: Vec<u32>,
    // adjacency[node] = (input, successor node), sorted by (input rank, successor state rank)
    pub(crate) adjacency: Vec<Vec<(u32, u32)>>,
    // first-discovery parent: (node, input); None for initial nodes
    pub(crate) parent: Vec<Option<(u32, u32)>>,
}

impl Observer {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum()
    }

    pub fn initial_node_indices(&self) -> &[u32] {
        &self.initial
    }

    pub fn node(&self, index: usize) -> EstimatorState {
        let (state, est) = self.nodes[index];
        EstimatorState {
            state,
            estimate: Arc::clone(self.table.get(est)),
        }
    }

    /// All edges as (from node, input index, to node).
    pub fn edges(&self) -> impl Iterator<Item = (usize, u32, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(from, outs)| outs.iter().map(move |&(u, to)| (from, u, to as usize)))
    }

    /// The shortest run (ties broken lexicographically) reaching `node`,
    /// recovered from first-discovery parents.
    pub(crate) fn run_to(&self, node: u32, sys: &MetricSystem) -> Run {
        let mut rev_states = Vec::new();
        let mut rev_inputs = Vec::new();
        let mut cur = node;
        loop {
            rev_states.push(sys.state_id(self.nodes[cur as usize].0).to_string());
            match self.parent[cur as usize] {
                Some((p, u)) => {
                    rev_inputs.push(sys.input_id(u).to_string());
                    cur = p;
                }
                None => break,
            }
        }
        rev_states.reverse();
        rev_inputs.reverse();
        Run {
            states: rev_states,
            inputs: rev_inputs,
        }
    }
}

/// Initial estimate for an initial state `x0`: every initial state whose
/// output is within δ of `H(x0)`.
fn initial_estimate(sys: &MetricSystem, delta: f64, x0: u32) -> Vec<u32> {
    sys.initial_indices()
        .into_iter()
        .filter(|&x| sys.output_distance_idx(x0, x) <= delta)
        .collect()
}

/// One estimate update: take every successor (under any input) of the
/// current estimate, then keep those whose output is within δ of the new
/// state's output. The intruder does not see the input, hence the union
/// over all of them.
fn step_estimate(sys: &MetricSystem, delta: f64, estimate: &[u32], x_next: u32) -> Vec<u32> {
    let mut out: Vec<u32> = estimate
        .iter()
        .flat_map(|&z| sys.all_successor_indices(z))
        .filter(|&x| sys.output_distance_idx(x_next, x) <= delta)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Estimator nodes for every initial state, sorted by state identifier.
pub fn initial_observer_states(
    sys: &MetricSystem,
    delta: f64,
) -> Result<Vec<EstimatorState>, EstimatorError> {
    require_clean(sys)?;
    require_delta(delta)?;
    let mut table = EstimateTable::default();
    let mut out = Vec::new();
    for &x0 in sys.states_by_name() {
        if !sys.is_initial(x0) {
            continue;
        }
        let (_, estimate) = table.intern(initial_estimate(sys, delta, x0));
        out.push(EstimatorState { state: x0, estimate });
    }
    Ok(out)
}

/// Advances one estimator node along an actual transition `(x, u, x')`.
pub fn observer_step(
    sys: &MetricSystem,
    delta: f64,
    node: &EstimatorState,
    input: &str,
    x_next: &str,
) -> Result<EstimatorState, EstimatorError> {
    require_clean(sys)?;
    require_delta(delta)?;
    let u = sys
        .index_of_input(input)
        .map_err(|_| EstimatorError::UnknownInput(input.to_string()))?;
    let xn = sys
        .index_of_state(x_next)
        .map_err(|_| EstimatorError::UnknownState(x_next.to_string()))?;
    if !sys.successor_indices(node.state, u).contains(&xn) {
        return Err(EstimatorError::NoSuchTransition {
            from: sys.state_id(node.state).to_string(),
            input: input.to_string(),
            to: x_next.to_string(),
        });
    }
    let mut table = EstimateTable::default();
    let (_, estimate) = table.intern(step_estimate(sys, delta, &node.estimate, xn));
    Ok(EstimatorState { state: xn, estimate })
}

/// Builds the full reachable estimator product.
pub fn build_observer(sys: &MetricSystem, delta: f64) -> Result<Observer, EstimatorError> {
    require_clean(sys)?;
    require_delta(delta)?;
    let mut table = EstimateTable::default();
    let mut node_index: HashMap<(u32, u32), u32> = HashMap::new();
    let mut nodes: Vec<(u32, u32)> = Vec::new();
    let mut parent: Vec<Option<(u32, u32)>> = Vec::new();
    let mut initial = Vec::new();
    let mut queue = std::collections::VecDeque::new();

    for &x0 in sys.states_by_name() {
        if !sys.is_initial(x0) {
            continue;
        }
        let (est_id, _) = table.intern(initial_estimate(sys, delta, x0));
        let key = (x0, est_id);
        let id = *node_index.entry(key).or_insert_with(|| {
            let id = nodes.len() as u32;
            nodes.push(key);
            parent.push(None);
            queue.push_back(id);
            id
        });
        if !initial.contains(&id) {
            initial.push(id);
        }
    }

    let inputs_by_name = sys.inputs_by_name();
    let mut adjacency: Vec<Vec<(u32, u32)>> = Vec::new();
    while let Some(cur) = queue.pop_front() {
        let (x, est_id) = nodes[cur as usize];
        let estimate = Arc::clone(table.get(est_id));
        let mut outs = Vec::new();
        for &u in &inputs_by_name {
            // successor_indices is sorted by declaration; re-sort by name rank
            let mut succ: Vec<u32> = sys.successor_indices(x, u).to_vec();
            succ.sort_by_key(|&s| sys.state_id(s));
            for xn in succ {
                let (next_est, _) = {
                    let members = step_estimate(sys, delta, &estimate, xn);
                    table.intern(members)
                };
                let key = (xn, next_est);
                let to = *node_index.entry(key).or_insert_with(|| {
                    let id = nodes.len() as u32;
                    nodes.push(key);
                    parent.push(Some((cur, u)));
                    queue.push_back(id);
                    id
                });
                outs.push((u, to));
            }
        }
        // cur was popped in id order, so pushing keeps adjacency aligned
        debug_assert_eq!(adjacency.len(), cur as usize);
        adjacency.push(outs);
    }

    Ok(Observer {
        delta,
        nodes,
        table,
        initial,
        adjacency,
        parent,
    })
}

/// The estimate after a concrete run, computed from first principles: walk
/// every run of the same length whose outputs stay within δ of the given
/// run's outputs step-by-step, and collect the states those runs end in.
/// Exponential in the worst case — this is the reference the observer is
/// checked against, not the production path.
pub fn estimate_of_run(
    sys: &MetricSystem,
    delta: f64,
    run: &Run,
) -> Result<Vec<String>, EstimatorError> {
    require_clean(sys)?;
    require_delta(delta)?;
    let (states, _) = run.resolve(sys)?;
    let outputs: Vec<u32> = states;
    let mut finals: Vec<u32> = Vec::new();

    fn dfs(
        sys: &MetricSystem,
        delta: f64,
        observed: &[u32],
        depth: usize,
        x: u32,
        finals: &mut Vec<u32>,
    ) {
        if sys.output_distance_idx(observed[depth], x) > delta {
            return;
        }
        if depth + 1 == observed.len() {
            finals.push(x);
            return;
        }
        for u in 0..sys.input_count() as u32 {
            for &xn in sys.successor_indices(x, u) {
                dfs(sys, delta, observed, depth + 1, xn, finals);
            }
        }
    }

    for x0 in sys.initial_indices() {
        dfs(sys, delta, &outputs, 0, x0, &mut finals);
    }
    finals.sort_unstable();
    finals.dedup();
    Ok(sys.ids_of(&finals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MetricSystem;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    // two parallel chains with pairwise-close outputs, initial {A, E}
    fn chains(delta_safe: bool) -> MetricSystem {
        let (c, h) = if delta_safe { (2.9, 3.1) } else { (2.9, 3.4) };
        MetricSystem::from_tables(
            &[
                ("A", &[1.1], true, false),
                ("B", &[2.1], false, false),
                ("C", &[c], false, true),
                ("D", &[4.0], false, false),
                ("E", &[1.2], true, false),
                ("F", &[2.3], false, false),
                ("G", &[h], false, false),
                ("H", &[4.2], false, true),
            ],
            &["u"],
            &[
                ("A", "u", "B"),
                ("B", "u", "C"),
                ("C", "u", "D"),
                ("D", "u", "D"),
                ("E", "u", "F"),
                ("F", "u", "G"),
                ("G", "u", "H"),
                ("H", "u", "H"),
            ],
        )
    }

    #[test]
    fn initial_estimates_group_close_outputs() {
        let sys = chains(true);
        // |1.1 - 1.2| <= 0.2: A and E see each other
        let init = initial_observer_states(&sys, 0.2).unwrap();
        assert_eq!(init.len(), 2);
        assert_eq!(init[0].state_id(&sys), "A");
        assert_eq!(init[0].estimate_ids(&sys), vec!["A", "E"]);
        assert_eq!(init[1].state_id(&sys), "E");
        assert_eq!(init[1].estimate_ids(&sys), vec!["A", "E"]);
        // at δ = 0 the outputs differ, so each is alone
        let init = initial_observer_states(&sys, 0.0).unwrap();
        assert_eq!(init[0].estimate_ids(&sys), vec!["A"]);
        assert_eq!(init[1].estimate_ids(&sys), vec!["E"]);
    }

    #[test]
    fn estimate_always_contains_actual_state() {
        let sys = chains(true);
        for delta in [0.0, 0.1, 0.2, 1.0] {
            let obs = build_observer(&sys, delta).unwrap();
            for i in 0..obs.node_count() {
                let node = obs.node(i);
                assert!(
                    node.contains(node.state),
                    "node {i} at delta {delta} lost its own state"
                );
                assert!(node.estimate_len() > 0);
            }
        }
    }

    #[test]
    fn step_follows_union_of_successors() {
        let sys = chains(true);
        let init = initial_observer_states(&sys, 0.2).unwrap();
        let a = init[0].clone();
        let next = observer_step(&sys, 0.2, &a, "u", "B").unwrap();
        assert_eq!(next.state_id(&sys), "B");
        // successors of {A, E} are {B, F}; |2.1-2.3| = 0.2 keeps both
        assert_eq!(next.estimate_ids(&sys), vec!["B", "F"]);
        // an impossible step errors rather than producing an empty estimate
        assert!(matches!(
            observer_step(&sys, 0.2, &a, "u", "C"),
            Err(EstimatorError::NoSuchTransition { .. })
        ));
    }

    #[test]
    fn rejects_bad_delta_and_dirty_systems() {
        let sys = chains(true);
        assert!(matches!(
            build_observer(&sys, f64::NAN),
            Err(EstimatorError::InvalidDelta(_))
        ));
        assert!(matches!(
            build_observer(&sys, -0.1),
            Err(EstimatorError::InvalidDelta(_))
        ));
        let broken = MetricSystem::from_tables(&[("A", &[0.0], false, false)], &["u"], &[]);
        assert!(matches!(
            build_observer(&broken, 0.0),
            Err(EstimatorError::InvalidSystem(_))
        ));
    }

    #[test]
    fn interning_shares_equal_estimates() {
        let sys = chains(true);
        let obs = build_observer(&sys, 0.2).unwrap();
        let a = obs.node(0);
        let e = obs.node(1);
        assert_eq!(a.estimate, e.estimate);
        assert!(Arc::ptr_eq(&a.estimate, &e.estimate));
    }

    #[test]
    fn node_count_matches_exhaustive_enumeration() {
        // every distinct (final state, estimate-of-run) pair over all runs
        // must appear as an observer node, and nothing else
        let sys = MetricSystem::from_tables(
            &[
                ("p", &[0.0], true, false),
                ("q", &[0.0], false, true),
                ("r", &[1.0], false, false),
            ],
            &["a", "b"],
            &[
                ("p", "a", "q"),
                ("p", "b", "r"),
                ("q", "a", "p"),
                ("q", "a", "r"),
                ("r", "b", "r"),
            ],
        );
        for delta in [0.0, 1.0] {
            let obs = build_observer(&sys, delta).unwrap();
            let mut expected: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
            // depth bound |X| * 2^|X| safely exceeds the product's diameter
            let bound = sys.state_count() * (1 << sys.state_count());
            let mut frontier: Vec<Run> = sys
                .state_ids()
                .filter_map(|s| {
                    let run = Run::new(vec![s.to_string()], vec![]).unwrap();
                    run.resolve(&sys).ok().map(|_| run)
                })
                .collect();
            for _ in 0..=bound {
                let mut next = Vec::new();
                for run in &frontier {
                    let est = estimate_of_run(&sys, delta, run).unwrap();
                    let key = (run.states.last().unwrap().clone(), est);
                    let fresh = expected.insert(key);
                    // only extend runs that discovered a new pair; extending
                    // a repeated (state, estimate) pair can only rediscover
                    // successors of an already-expanded node
                    if !fresh {
                        continue;
                    }
                    let last = run.states.last().unwrap().clone();
                    for u in sys.input_ids() {
                        for to in sys.successors(&last, u).unwrap() {
                            let mut states = run.states.clone();
                            let mut inputs = run.inputs.clone();
                            states.push(to.clone());
                            inputs.push(u.to_string());
                            next.push(Run { states, inputs });
                        }
                    }
                }
                frontier = next;
                if frontier.is_empty() {
                    break;
                }
            }
            assert_eq!(obs.node_count(), expected.len(), "delta = {delta}");
        }
    }

    #[test]
    fn observer_agrees_with_run_enumeration() {
        // δ = 0.25 sits strictly above every intended output gap, clear of
        // the rounding of |2.9 - 3.1| to just over 0.2 in f64
        let sys = chains(true);
        let run = Run::of(&["A", "u", "B", "u", "C"]).unwrap();
        let brute = estimate_of_run(&sys, 0.25, &run).unwrap();
        // walk the same run through the observer
        let init = initial_observer_states(&sys, 0.25).unwrap();
        let mut node = init.into_iter().find(|n| n.state_id(&sys) == "A").unwrap();
        node = observer_step(&sys, 0.25, &node, "u", "B").unwrap();
        node = observer_step(&sys, 0.25, &node, "u", "C").unwrap();
        assert_eq!(node.estimate_ids(&sys), brute);
        assert_eq!(brute, vec!["C", "G"]);
    }

    #[test]
    fn estimate_of_run_rejects_fake_runs() {
        let sys = chains(true);
        let run = Run::of(&["B", "u", "C"]).unwrap();
        assert!(matches!(
            estimate_of_run(&sys, 0.2, &run),
            Err(EstimatorError::RunNotInitial(_))
        ));
        let run = Run::of(&["A", "u", "C"]).unwrap();
        assert!(matches!(
            estimate_of_run(&sys, 0.2, &run),
            Err(EstimatorError::NoSuchTransition { .. })
        ));
    }

    #[test]
    fn run_constructors_check_shape() {
        assert!(Run::new(vec![], vec![]).is_err());
        assert!(Run::new(vec!["a".into()], vec!["u".into()]).is_err());
        assert!(Run::of(&["a", "u"]).is_err());
        let r = Run::of(&["a", "u", "b"]).unwrap();
        assert_eq!(r.len(), 1);
    }

    proptest! {
        // growing δ can only grow estimates (pointwise on the same run)
        #[test]
        fn delta_monotone_estimates(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let sys = chains(true);
            let run = Run::of(&["A", "u", "B", "u", "C"]).unwrap();
            let small: BTreeSet<String> =
                estimate_of_run(&sys, lo, &run).unwrap().into_iter().collect();
            let large: BTreeSet<String> =
                estimate_of_run(&sys, hi, &run).unwrap().into_iter().collect();
            prop_assert!(small.is_subset(&large));
        }
    }
}

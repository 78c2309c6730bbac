//! End-to-end flow: discretize a control system, decide the property on
//! the finite abstraction, and transfer a holding verdict back to the
//! concrete trajectories.
//!
//! The transfer is one-directional. A verdict that HOLDS on the abstraction
//! at precision δ holds on the concrete system at δ + 2ε. A violation on
//! the abstraction establishes nothing about the concrete system — the
//! abstraction over-approximates, so the honest outcome in that case is
//! "inconclusive: refine the grid or the inflation and retry".

use crate::abstraction::{
    build_abstraction, Abstraction, AbstractionError, ControlSystemSpec, QuantizationParams,
    QuantizationReport, SecretMode,
};
use crate::estimator::{build_observer, EstimatorError, Observer};
use crate::relation::{transfer_verdict, RelationError};
use crate::verify::{verdict_from_observer, Verdict};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Transfer(#[from] RelationError),
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub params: QuantizationParams,
    pub epsilon: f64,
    /// Measurement precision at which the abstraction is verified.
    pub delta: f64,
    pub k: u32,
    pub mode: SecretMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineStatus {
    /// The abstraction satisfies the property; the concrete system is
    /// covered at `concrete_guarantee`.
    Guaranteed,
    /// The abstraction violates it; no concrete conclusion follows.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub quantization: QuantizationReport,
    pub secret_mode: SecretMode,
    pub states: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub secret_states: Vec<String>,
    pub epsilon: f64,
    pub verdict: Verdict,
    /// `delta + 2 * epsilon` when the verdict holds; absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concrete_guarantee: Option<f64>,
    pub status: PipelineStatus,
    pub note: String,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut out = self.quantization.render();
        out.push_str(&format!(
            "abstraction: {} states, {} input(s), {} transitions\n",
            self.states, self.inputs, self.transitions
        ));
        out.push_str(&format!(
            "secret states: {}\n",
            self.secret_states.join(", ")
        ));
        let v = &self.verdict;
        out.push_str(&format!(
            "verdict on the abstraction: {} at delta = {}, K = {} ({} estimator nodes)\n",
            if v.holds { "HOLDS" } else { "VIOLATED" },
            v.delta,
            v.k,
            v.observer_nodes
        ));
        match self.concrete_guarantee {
            Some(g) => out.push_str(&format!(
                "concrete guarantee: the property holds at delta = {} (= {} + 2 * {})\n",
                g, v.delta, self.epsilon
            )),
            None => out.push_str("concrete guarantee: none\n"),
        }
        out.push_str(&format!("note: {}\n", self.note));
        out
    }
}

pub struct PipelineOutput {
    pub abstraction: Abstraction,
    pub observer: Observer,
    pub report: PipelineReport,
}

pub fn run_pipeline(
    spec: &ControlSystemSpec,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let abstraction = build_abstraction(spec, &cfg.params, cfg.epsilon, cfg.mode)?;
    let observer = build_observer(&abstraction.system, cfg.delta)?;
    let verdict = verdict_from_observer(&abstraction.system, &observer, cfg.k);

    let (concrete_guarantee, status, note) = if verdict.holds {
        (
            Some(transfer_verdict(cfg.delta, cfg.epsilon)?),
            PipelineStatus::Guaranteed,
            format!(
                "a verdict that holds on the abstraction at precision {} extends to every \
                 concrete trajectory at precision {} + 2 * {}; the converse direction does \
                 not hold",
                cfg.delta, cfg.delta, cfg.epsilon
            ),
        )
    } else {
        (
            None,
            PipelineStatus::Inconclusive,
            "the abstraction violates the property, but the transfer is one-directional: \
             this does not establish a concrete violation. Refine eta, mu, or theta and retry"
                .to_string(),
        )
    };

    let report = PipelineReport {
        quantization: abstraction.report.quantization.clone(),
        secret_mode: abstraction.report.secret_mode,
        states: abstraction.report.states,
        inputs: abstraction.report.inputs,
        transitions: abstraction.report.transitions,
        secret_states: abstraction.report.secret_states.clone(),
        epsilon: cfg.epsilon,
        verdict,
        concrete_guarantee,
        status,
        note,
    };
    Ok(PipelineOutput {
        abstraction,
        observer,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"{
        "state_dim": 1,
        "input_dim": 1,
        "state_set": [[[0.0, 12.0]]],
        "secret_set": [[[11.0, 12.0]]],
        "input_set": [[[0.05, 0.05]]],
        "dynamics": ["0.2*x1 + u1"],
        "output": ["abs(cos(0.1*pi*x1))"],
        "alpha": {"kind": "linear", "params": {"c": 0.3141592653589793}},
        "beta": {"kind": "kl-exp-linear", "params": {"c": 1.0, "lambda": 0.2}},
        "gamma": {"kind": "linear", "params": {"c": 2.0}}
    }"#;

    fn cfg() -> PipelineConfig {
        PipelineConfig {
            params: QuantizationParams {
                eta: 1.0,
                mu: 0.0,
                theta: 2.3,
            },
            epsilon: 0.4,
            delta: 0.0,
            k: 0,
            mode: SecretMode::Cell,
        }
    }

    #[test]
    fn contraction_example_is_guaranteed() {
        let spec = ControlSystemSpec::from_json(SPEC).unwrap();
        let out = run_pipeline(&spec, &cfg()).unwrap();
        let r = &out.report;
        assert_eq!(r.states, 12);
        assert_eq!(r.secret_states, vec!["8", "9", "10", "11"]);
        assert!(r.verdict.holds);
        assert_eq!(r.status, PipelineStatus::Guaranteed);
        assert_eq!(r.concrete_guarantee, Some(0.8));
        let text = r.render();
        assert!(text.contains("HOLDS"));
        assert!(text.contains("0.8"));
    }

    #[test]
    fn quantization_failure_stops_the_pipeline() {
        let spec = ControlSystemSpec::from_json(SPEC).unwrap();
        let mut bad = cfg();
        bad.params.eta = 1.1;
        match run_pipeline(&spec, &bad) {
            Err(PipelineError::Abstraction(AbstractionError::QuantizationFailed { report })) => {
                assert_eq!(report.first_failure().unwrap().name, "contraction");
            }
            other => panic!("expected quantization failure, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn violated_abstraction_reports_inconclusive() {
        // widen the secret set until every cell is secret at theta = 2.3:
        // the verdict on the abstraction flips to violated, and the report
        // must refuse to claim anything concrete
        let text = SPEC.replace("[[[11.0, 12.0]]]", "[[[2.0, 12.0]]]");
        let spec = ControlSystemSpec::from_json(&text).unwrap();
        let out = run_pipeline(&spec, &cfg()).unwrap();
        assert!(!out.report.verdict.holds);
        assert_eq!(out.report.status, PipelineStatus::Inconclusive);
        assert_eq!(out.report.concrete_guarantee, None);
        assert!(out.report.render().contains("concrete guarantee: none"));
    }
}

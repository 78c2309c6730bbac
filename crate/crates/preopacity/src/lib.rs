//! Verification of approximate K-step pre-opacity for finite metric
//! transition systems, with three connected capabilities:
//!
//! - **Verify**: decide whether an outside observer with δ-precision
//!   measurements can ever become certain, part-way through a run, that the
//!   system is guaranteed to be in a secret state at some exact future step
//!   t ≥ K ([`verify_preopacity`]). Violations come with a replayable
//!   witness run. An independent bounded-horizon enumeration
//!   ([`oracle::oracle_verify`]) cross-checks the estimator-based decision.
//! - **Relate**: check or compute approximate simulation relations between
//!   two systems that preserve the property across them
//!   ([`relation::max_akp_relation`]); a verdict at δ on one side transfers
//!   to δ + 2ε on the other ([`relation::transfer_verdict`]).
//! - **Abstract**: discretize a contractive (δ-ISS) control system into a
//!   finite metric system whose verdict carries back to the concrete
//!   trajectories ([`abstraction::build_abstraction`]), gated on two
//!   quantization inequalities linking grid resolution to the contraction
//!   certificate.
//!
//! Systems are JSON files (see [`model::MetricSystem::from_json`]);
//! control-system dynamics are written in a small arithmetic expression
//! language (see [`dsl::parse_expression`]).

pub mod abstraction;
pub mod boxes;
pub mod cli;
pub mod dot;
pub mod dsl;
pub mod estimator;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod random;
pub mod relation;
pub mod verify;

pub use abstraction::{
    build_abstraction, check_delta_iss_empirical, check_quantization, Abstraction,
    AbstractionError, BuildReport, ControlSystemSpec, QuantizationParams, QuantizationReport,
    SecretMode,
};
pub use boxes::BoxUnion;
pub use dot::{observer_dot, system_dot};
pub use dsl::{parse_expression, ComparisonFunction, Expression};
pub use estimator::{build_observer, estimate_of_run, EstimatorError, Observer, Run};
pub use model::{output_distance, MetricSystem, ModelError, ValidationReport};
pub use oracle::{oracle_verify, OracleError, OracleQuery};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput, PipelineReport, PipelineStatus};
pub use random::{random_system, RandomSystemConfig};
pub use relation::{
    candidate_relation, check_relation, max_akp_relation, transfer_verdict, AkpResult,
    RelationError, RelationPairs, RelationViolation,
};
pub use verify::{
    backward_operator, indicator, verdict_from_observer, verify_preopacity, IndicatorSet, Verdict,
    VerifyError, WitnessStep,
};

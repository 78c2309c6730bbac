//! Comparison functions for the contractivity assumptions.
//!
//! Two families appear in the quantization bounds: class-K∞ functions
//! (strictly increasing, zero at zero, unbounded) used for α and γ, and
//! class-KL functions (K∞ in the radius, decreasing to zero in the step
//! count) used for β. Three closed forms cover everything the examples
//! need; all have exact inverses where an inverse is required.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ComparisonFunction {
    /// `r ↦ c·r` (class K∞)
    Linear { c: f64 },
    /// `r ↦ c·r^p` (class K∞)
    Power { c: f64, p: f64 },
    /// `(r, k) ↦ c·λ^k·r` (class KL; requires `0 < λ < 1`)
    KlExpLinear { c: f64, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparisonError {
    #[error("parameter {name} must be a positive finite real, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("lambda must lie strictly between 0 and 1, got {0}")]
    LambdaOutOfRange(f64),
    #[error("this operation needs a {expected} function, got kind '{got}'")]
    KindMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("epsilon must be a positive finite real, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("radius must be a non-negative finite real, got {0}")]
    NegativeRadius(f64),
}

fn positive(name: &'static str, value: f64) -> Result<(), ComparisonError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ComparisonError::NonPositiveParameter { name, value });
    }
    Ok(())
}

fn radius(value: f64) -> Result<(), ComparisonError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(ComparisonError::NegativeRadius(value));
    }
    Ok(())
}

impl ComparisonFunction {
    pub fn linear(c: f64) -> Result<Self, ComparisonError> {
        let f = ComparisonFunction::Linear { c };
        f.validate()?;
        Ok(f)
    }

    pub fn power(c: f64, p: f64) -> Result<Self, ComparisonError> {
        let f = ComparisonFunction::Power { c, p };
        f.validate()?;
        Ok(f)
    }

    pub fn kl_exp_linear(c: f64, lambda: f64) -> Result<Self, ComparisonError> {
        let f = ComparisonFunction::KlExpLinear { c, lambda };
        f.validate()?;
        Ok(f)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ComparisonFunction::Linear { .. } => "linear",
            ComparisonFunction::Power { .. } => "power",
            ComparisonFunction::KlExpLinear { .. } => "kl-exp-linear",
        }
    }

    pub fn is_kinf(&self) -> bool {
        matches!(
            self,
            ComparisonFunction::Linear { .. } | ComparisonFunction::Power { .. }
        )
    }

    /// Parameter checks. Serde will happily deserialize `c = -1`, so loaders
    /// call this after parsing.
    pub fn validate(&self) -> Result<(), ComparisonError> {
        match *self {
            ComparisonFunction::Linear { c } => positive("c", c),
            ComparisonFunction::Power { c, p } => {
                positive("c", c)?;
                positive("p", p)
            }
            ComparisonFunction::KlExpLinear { c, lambda } => {
                positive("c", c)?;
                if !(lambda.is_finite() && lambda > 0.0 && lambda < 1.0) {
                    return Err(ComparisonError::LambdaOutOfRange(lambda));
                }
                Ok(())
            }
        }
    }

    /// Evaluates a class-K∞ kind at radius `r`. This is the evaluation used
    /// for both the α (output lower bound) and γ (input gain) roles.
    pub fn eval_kinf(&self, r: f64) -> Result<f64, ComparisonError> {
        self.validate()?;
        radius(r)?;
        match *self {
            ComparisonFunction::Linear { c } => Ok(c * r),
            ComparisonFunction::Power { c, p } => Ok(c * r.powf(p)),
            ComparisonFunction::KlExpLinear { .. } => Err(ComparisonError::KindMismatch {
                expected: "class-K∞ (linear or power)",
                got: self.kind_name(),
            }),
        }
    }

    /// Exact inverse of a class-K∞ kind at `eps > 0`: the radius `r` with
    /// `f(r) = eps`.
    pub fn alpha_inverse(&self, eps: f64) -> Result<f64, ComparisonError> {
        self.validate()?;
        if !(eps.is_finite() && eps > 0.0) {
            return Err(ComparisonError::NonPositiveEpsilon(eps));
        }
        match *self {
            ComparisonFunction::Linear { c } => Ok(eps / c),
            ComparisonFunction::Power { c, p } => Ok((eps / c).powf(1.0 / p)),
            ComparisonFunction::KlExpLinear { .. } => Err(ComparisonError::KindMismatch {
                expected: "class-K∞ (linear or power)",
                got: self.kind_name(),
            }),
        }
    }

    /// Evaluates a class-KL kind at radius `r` and step count `k`.
    pub fn eval_beta(&self, r: f64, k: u32) -> Result<f64, ComparisonError> {
        self.validate()?;
        radius(r)?;
        match *self {
            ComparisonFunction::KlExpLinear { c, lambda } => Ok(c * lambda.powi(k as i32) * r),
            _ => Err(ComparisonError::KindMismatch {
                expected: "class-KL (kl-exp-linear)",
                got: self.kind_name(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_inverse() {
        let alpha = ComparisonFunction::linear(0.1 * std::f64::consts::PI).unwrap();
        let r = alpha.alpha_inverse(0.4).unwrap();
        assert!((r - 4.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn power_inverse() {
        let alpha = ComparisonFunction::power(1.0, 2.0).unwrap();
        assert!((alpha.alpha_inverse(4.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_decays_geometrically() {
        let beta = ComparisonFunction::kl_exp_linear(1.0, 0.2).unwrap();
        let r = 4.0 / std::f64::consts::PI;
        let v = beta.eval_beta(r, 1).unwrap();
        assert!((v - 0.2 * r).abs() < 1e-12);
        // k = 0 leaves the radius scaled by c only
        assert_eq!(beta.eval_beta(3.5, 0).unwrap(), 3.5);
    }

    #[test]
    fn gamma_vanishes_at_zero() {
        let gamma = ComparisonFunction::linear(2.0).unwrap();
        assert_eq!(gamma.eval_kinf(0.0).unwrap(), 0.0);
        assert_eq!(gamma.eval_kinf(0.3).unwrap(), 0.6);
    }

    #[test]
    fn kind_mismatches_are_rejected() {
        let beta = ComparisonFunction::kl_exp_linear(1.0, 0.2).unwrap();
        assert!(matches!(
            beta.eval_kinf(1.0),
            Err(ComparisonError::KindMismatch { .. })
        ));
        assert!(matches!(
            beta.alpha_inverse(1.0),
            Err(ComparisonError::KindMismatch { .. })
        ));
        let gamma = ComparisonFunction::linear(2.0).unwrap();
        assert!(matches!(
            gamma.eval_beta(1.0, 0),
            Err(ComparisonError::KindMismatch { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ComparisonFunction::linear(0.0).is_err());
        assert!(ComparisonFunction::linear(f64::NAN).is_err());
        assert!(ComparisonFunction::power(1.0, -2.0).is_err());
        assert!(matches!(
            ComparisonFunction::kl_exp_linear(1.0, 1.0),
            Err(ComparisonError::LambdaOutOfRange(_))
        ));
        assert!(ComparisonFunction::kl_exp_linear(1.0, 0.999).is_ok());
        // a deserialized value with bad params fails validate()
        let bad: ComparisonFunction =
            serde_json::from_str(r#"{"kind":"linear","params":{"c":-1.0}}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn negative_radius_and_epsilon_rejected() {
        let f = ComparisonFunction::linear(1.0).unwrap();
        assert!(matches!(
            f.eval_kinf(-0.5),
            Err(ComparisonError::NegativeRadius(_))
        ));
        assert!(matches!(
            f.alpha_inverse(0.0),
            Err(ComparisonError::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn serde_shape() {
        let f = ComparisonFunction::kl_exp_linear(0.5, 0.25).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"kind":"kl-exp-linear","params":{"c":0.5,"lambda":0.25}}"#);
        let back: ComparisonFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    fn arb_kinf() -> impl Strategy<Value = ComparisonFunction> {
        prop_oneof![
            (0.01f64..10.0).prop_map(|c| ComparisonFunction::Linear { c }),
            ((0.01f64..10.0), (0.2f64..3.0))
                .prop_map(|(c, p)| ComparisonFunction::Power { c, p }),
        ]
    }

    proptest! {
        // alpha_inverse really inverts: f(f^{-1}(eps)) = eps
        #[test]
        fn inverse_round_trip(f in arb_kinf(), eps in 0.001f64..100.0) {
            let r = f.alpha_inverse(eps).unwrap();
            let back = f.eval_kinf(r).unwrap();
            prop_assert!((back - eps).abs() <= 1e-9 * eps.max(1.0));
        }

        // class-K∞ membership: zero at zero, strictly increasing on samples
        #[test]
        fn kinf_class_membership(f in arb_kinf(), a in 0.0f64..50.0, d in 0.001f64..5.0) {
            prop_assert_eq!(f.eval_kinf(0.0).unwrap(), 0.0);
            let lo = f.eval_kinf(a).unwrap();
            let hi = f.eval_kinf(a + d).unwrap();
            prop_assert!(hi > lo);
        }

        // class-KL membership: K∞ in r for fixed k, strictly decreasing in
        // k for fixed r > 0, and -> 0 as k grows
        #[test]
        fn kl_class_membership(
            c in 0.01f64..10.0,
            lambda in 0.05f64..0.95,
            r in 0.001f64..50.0,
            k in 0u32..20,
        ) {
            let f = ComparisonFunction::kl_exp_linear(c, lambda).unwrap();
            prop_assert_eq!(f.eval_beta(0.0, k).unwrap(), 0.0);
            prop_assert!(f.eval_beta(r, k + 1).unwrap() < f.eval_beta(r, k).unwrap());
            // decay: 1000 steps shrink by at least lambda^1000 <= 0.95^1000,
            // nine orders of magnitude below the k = 0 value
            prop_assert!(f.eval_beta(r, 1000).unwrap() < 1e-9 * f.eval_beta(r, 0).unwrap());
        }
    }
}

//! A small expression language for dynamics and output maps, plus the
//! comparison-function classes (K∞ and KL) used in the contractivity
//! assumptions and quantization bounds.

mod comparison;
mod expr;

pub use comparison::{ComparisonError, ComparisonFunction};
pub use expr::{parse_expression, EvalError, Expression, ParseError};

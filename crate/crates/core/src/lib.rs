//! Exact martingale games over binary sequences.
//!
//! Strategies are programs that may run slowly or never halt; capital is kept
//! as exact rationals. On top of evaluation sit the classical transforms,
//! diagonal sequences against weighted families and a randomized protocol for
//! building generic martingales.

pub mod bits;
pub mod bound;
pub mod catalog;
pub mod diagonalization;
pub mod finite;
pub mod fireworks;
pub mod martingale;
pub mod oracle;
pub mod rat;
pub mod sequence;
pub mod transforms;

pub use bits::BitString;
pub use martingale::{Budget, EvalOutcome, StrategyProgram};
pub use rat::Rat;
pub use sequence::SequenceProgram;

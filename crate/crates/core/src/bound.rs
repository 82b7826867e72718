//! Step counts indexed by string length.
//!
//! The same shape serves as the time bound ψ of a totalized martingale, the
//! declared per-node cost of a costly strategy and the oracle-use bound of an
//! oracle strategy. Bounds must be nondecreasing; costs need not be.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("bound table is empty")]
    EmptyTable,
    #[error("bound table must start at length 0")]
    TableStart,
    #[error("bound table lengths must be strictly increasing")]
    TableOrder,
    #[error("bound table values must be nondecreasing (length {0})")]
    Decreasing(usize),
}

/// A function from length to a step count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBound {
    Constant(u64),
    /// `a·n + b`.
    Affine {
        a: u64,
        b: u64,
    },
    /// Step function: the value of the last entry whose length is `<= n`.
    Table(Vec<(usize, u64)>),
    /// Pointwise maximum.
    Max(Vec<TimeBound>),
    /// Unbounded: every computation is allowed to finish.
    Unlimited,
}

impl TimeBound {
    /// A nondecreasing table.
    pub fn table(entries: Vec<(usize, u64)>) -> Result<Self, BoundError> {
        let t = TimeBound::Table(entries);
        t.validate()?;
        Ok(t)
    }

    /// A table with arbitrary values, for per-node costs.
    pub fn cost_table(entries: Vec<(usize, u64)>) -> Result<Self, BoundError> {
        let t = TimeBound::Table(entries);
        t.validate_cost()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        self.check(true)
    }

    pub fn validate_cost(&self) -> Result<(), BoundError> {
        self.check(false)
    }

    fn check(&self, monotone: bool) -> Result<(), BoundError> {
        match self {
            TimeBound::Table(entries) => {
                let first = entries.first().ok_or(BoundError::EmptyTable)?;
                if first.0 != 0 {
                    return Err(BoundError::TableStart);
                }
                for w in entries.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(BoundError::TableOrder);
                    }
                    if monotone && w[1].1 < w[0].1 {
                        return Err(BoundError::Decreasing(w[1].0));
                    }
                }
                Ok(())
            }
            TimeBound::Max(parts) => parts.iter().try_for_each(|p| p.check(monotone)),
            _ => Ok(()),
        }
    }

    pub fn at(&self, n: usize) -> u64 {
        match self {
            TimeBound::Constant(c) => *c,
            TimeBound::Affine { a, b } => a.saturating_mul(n as u64).saturating_add(*b),
            TimeBound::Table(entries) => entries
                .iter()
                .take_while(|(len, _)| *len <= n)
                .last()
                .map(|(_, v)| *v)
                .unwrap_or(0),
            TimeBound::Max(parts) => parts.iter().map(|p| p.at(n)).max().unwrap_or(0),
            TimeBound::Unlimited => u64::MAX,
        }
    }
}

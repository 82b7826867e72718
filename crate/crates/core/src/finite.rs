//! Finite martingales: fair capital functions on all strings up to a length.
//!
//! Storage is sparse. An entry is kept only where the value differs from the
//! parent's value; every other string inherits its parent's value and the
//! root is 1. Because the representation is canonical, two finite
//! martingales agree on a common domain exactly when their entries of that
//! length range coincide.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::martingale::{Expansion, Strategy, StrategyProgram, Walker};
use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FiniteError {
    #[error("entry {0} is longer than the length {1}")]
    TooLong(BitString, usize),
    #[error("value at the empty string must be 1, got {0}")]
    Root(Rat),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteMartingale {
    length: usize,
    entries: BTreeMap<BitString, Rat>,
}

/// Outcome of an exact fairness check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FairnessReport {
    Ok,
    /// `f(σ) ≠ (f(σ0) + f(σ1)) / 2`.
    Unfair {
        at: BitString,
    },
    NonPositive {
        at: BitString,
    },
}

impl FairnessReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, FairnessReport::Ok)
    }
}

impl FiniteMartingale {
    /// The root condition: length 0, value 1.
    pub fn root() -> Self {
        FiniteMartingale {
            length: 0,
            entries: BTreeMap::new(),
        }
    }

    /// Builds from explicit values; strings not listed inherit their parent's
    /// value. Fairness is not checked here.
    pub fn from_entries(
        length: usize,
        entries: impl IntoIterator<Item = (BitString, Rat)>,
    ) -> Result<Self, FiniteError> {
        let mut raw = BTreeMap::new();
        for (s, v) in entries {
            if s.len() > length {
                return Err(FiniteError::TooLong(s, length));
            }
            if s.is_empty() && v != Rat::one() {
                return Err(FiniteError::Root(v));
            }
            raw.insert(s, v);
        }
        let mut f = FiniteMartingale {
            length,
            entries: BTreeMap::new(),
        };
        for (s, v) in raw {
            if s.is_empty() {
                continue;
            }
            let inherited = f.value(&s.parent().expect("nonempty"));
            if v != inherited {
                f.entries.insert(s, v);
            }
        }
        Ok(f)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn entries(&self) -> &BTreeMap<BitString, Rat> {
        &self.entries
    }

    /// Value at σ. Strings longer than the length get the value of their
    /// prefix of that length.
    pub fn value(&self, sigma: &BitString) -> Rat {
        let mut s = if sigma.len() > self.length {
            sigma.prefix(self.length)
        } else {
            sigma.clone()
        };
        loop {
            if let Some(v) = self.entries.get(&s) {
                return v.clone();
            }
            if s.pop().is_none() {
                return Rat::one();
            }
        }
    }

    /// `[f(σ↾0), …, f(σ↾n)]` with `n = min(|σ|, length)`, in one pass.
    pub fn values_along(&self, sigma: &BitString) -> Vec<Rat> {
        let n = sigma.len().min(self.length);
        let mut cur = self.value(&BitString::empty());
        let mut s = BitString::empty();
        let mut out = Vec::with_capacity(n + 1);
        out.push(cur.clone());
        for bit in sigma.iter().take(n) {
            s.push(bit);
            if let Some(v) = self.entries.get(&s) {
                cur = v.clone();
            }
            out.push(cur.clone());
        }
        out
    }

    /// Sets the two children of σ; `σ` must be shorter than the length.
    /// Keeps the representation canonical only if σ has no explicit
    /// descendants yet.
    pub fn set_children(&mut self, sigma: &BitString, zero: Rat, one: Rat) {
        assert!(
            sigma.len() < self.length,
            "children of {sigma} exceed length {}",
            self.length
        );
        let here = self.value(sigma);
        for (b, v) in [(false, zero), (true, one)] {
            let c = sigma.child(b);
            if v == here {
                self.entries.remove(&c);
            } else {
                self.entries.insert(c, v);
            }
        }
    }

    pub fn with_length(&self, length: usize) -> Self {
        assert!(length >= self.length, "cannot shrink a finite martingale");
        FiniteMartingale {
            length,
            entries: self.entries.clone(),
        }
    }

    /// The restriction to strings of length at most `length`.
    pub fn restrict(&self, length: usize) -> Self {
        assert!(length <= self.length, "cannot restrict upwards");
        FiniteMartingale {
            length,
            entries: self
                .entries
                .iter()
                .take_while(|(s, _)| s.len() <= length)
                .map(|(s, v)| (s.clone(), v.clone()))
                .collect(),
        }
    }

    /// No-bet extension by one level.
    pub fn default_extend(&self) -> Self {
        self.with_length(self.length + 1)
    }

    /// Exact check of positivity and of the averaging identity at every
    /// internal node; reports the first violation in length-then-lex order.
    ///
    /// Only parents of explicit entries can be unfair: every other internal
    /// node has two inherited children equal to itself.
    pub fn check_fairness(&self) -> FairnessReport {
        let mut first: Option<(BitString, bool)> = None;
        let mut note = |at: BitString, unfair: bool| {
            if first.as_ref().is_none_or(|(f, _)| at < *f) {
                first = Some((at, unfair));
            }
        };
        for (s, v) in &self.entries {
            if !v.is_positive() {
                note(s.clone(), false);
            }
        }
        let parents: std::collections::BTreeSet<BitString> =
            self.entries.keys().filter_map(BitString::parent).collect();
        for p in parents {
            let sum = self.value(&p.child(false)) + self.value(&p.child(true));
            if sum != self.value(&p) * Rat::int(2) {
                note(p, true);
                break;
            }
        }
        match first {
            None => FairnessReport::Ok,
            Some((at, true)) => FairnessReport::Unfair { at },
            Some((at, false)) => FairnessReport::NonPositive { at },
        }
    }

    /// Wraps this finite martingale as a total strategy that stops betting
    /// beyond its length.
    pub fn to_strategy(&self, id: impl Into<String>) -> StrategyProgram {
        StrategyProgram::new(FiniteStrategy {
            id: id.into(),
            f: Arc::new(self.clone()),
        })
    }
}

/// `q ≤ p` in the order of finite martingales: q's domain contains p's and
/// they agree on it.
pub fn order_extends(q: &FiniteMartingale, p: &FiniteMartingale) -> bool {
    if q.length < p.length {
        return false;
    }
    let n = p.length;
    let upto = |f: &FiniteMartingale| f.entries.iter().take_while(|(s, _)| s.len() <= n).count();
    let k = upto(p);
    k == upto(q) && q.entries.iter().zip(&p.entries).take(k).all(|(a, b)| a == b)
}

#[derive(Debug)]
struct FiniteStrategy {
    id: String,
    f: Arc<FiniteMartingale>,
}

impl Strategy for FiniteStrategy {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn initial_capital(&self) -> Rat {
        Rat::one()
    }

    fn walker(&self) -> Box<dyn Walker> {
        Box::new(FiniteWalker {
            f: Arc::clone(&self.f),
            position: BitString::empty(),
            capital: Rat::one(),
        })
    }
}

#[derive(Clone)]
struct FiniteWalker {
    f: Arc<FiniteMartingale>,
    position: BitString,
    capital: Rat,
}

impl FiniteWalker {
    fn child_value(&self, bit: bool) -> Rat {
        if self.position.len() >= self.f.length {
            return self.capital.clone();
        }
        self.f
            .entries
            .get(&self.position.child(bit))
            .cloned()
            .unwrap_or_else(|| self.capital.clone())
    }
}

impl Walker for FiniteWalker {
    fn position(&self) -> &BitString {
        &self.position
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        Expansion::Split {
            zero: self.child_value(false),
            one: self.child_value(true),
            steps: 1,
        }
    }

    fn descend(&mut self, bit: bool) {
        self.capital = self.child_value(bit);
        self.position.push(bit);
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(self.clone())
    }
}

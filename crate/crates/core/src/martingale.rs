//! Strategies, their evaluation under step budgets, and plays.
//!
//! A strategy is explored through a [`Walker`]: a cursor that sits on a
//! node σ, knows the capital there, and on request computes both children
//! (or reports that the computation at σ diverges). Catalog strategies are
//! described by a [`BetRule`] that names a side and a stake fraction at each
//! node; the induced capital `d(σb) = d(σ)(1 ± q)` is fair by construction.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::rat::Rat;
use crate::sequence::SequenceProgram;

/// What a bet rule does at a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bet {
    /// Put `fraction` of the current capital on `side`.
    Stake { side: bool, fraction: Rat },
    /// As `Stake`, but deciding the bet takes `steps` steps.
    Costly { side: bool, fraction: Rat, steps: u64 },
    /// The computation at this node never halts; both children are undefined.
    Diverge,
}

impl Bet {
    pub fn none() -> Bet {
        Bet::Stake {
            side: false,
            fraction: Rat::zero(),
        }
    }

    pub fn stake(side: bool, fraction: Rat) -> Bet {
        Bet::Stake { side, fraction }
    }

    pub fn steps(&self) -> u64 {
        match self {
            Bet::Costly { steps, .. } => *steps,
            _ => 1,
        }
    }
}

/// A deterministic betting rule: history in, bet out.
pub trait BetRule: Send + Sync + fmt::Debug {
    fn bet(&self, history: &BitString) -> Bet;
}

/// Result of computing the children of the walker's current node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expansion {
    Split { zero: Rat, one: Rat, steps: u64 },
    Diverge { steps: u64 },
}

impl Expansion {
    pub fn steps(&self) -> u64 {
        match self {
            Expansion::Split { steps, .. } | Expansion::Diverge { steps } => *steps,
        }
    }

    pub fn child(&self, bit: bool) -> Option<&Rat> {
        match self {
            Expansion::Split { zero, one, .. } => Some(if bit { one } else { zero }),
            Expansion::Diverge { .. } => None,
        }
    }
}

/// A cursor walking one path of a strategy's capital tree.
pub trait Walker: Send {
    fn position(&self) -> &BitString;
    fn capital(&self) -> &Rat;
    /// Children of the current node. Repeated calls at the same node return
    /// the same expansion.
    fn expand(&mut self) -> Expansion;
    /// Moves to child `bit`. Panics unless the current node split.
    fn descend(&mut self, bit: bool);
    /// An independent walker at the same node.
    fn fork(&self) -> Box<dyn Walker>;
}

/// A (possibly partial) exactly computable martingale.
pub trait Strategy: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    fn initial_capital(&self) -> Rat;
    fn walker(&self) -> Box<dyn Walker>;
}

/// Shared handle to a strategy.
#[derive(Clone)]
pub struct StrategyProgram(Arc<dyn Strategy>);

impl StrategyProgram {
    pub fn new(strategy: impl Strategy + 'static) -> Self {
        StrategyProgram(Arc::new(strategy))
    }

    pub fn from_rule(id: impl Into<String>, initial: Rat, rule: impl BetRule + 'static) -> Self {
        Self::new(BetStrategy::new(id, initial, Arc::new(rule)))
    }

    pub fn id(&self) -> String {
        self.0.id()
    }

    pub fn initial_capital(&self) -> Rat {
        self.0.initial_capital()
    }

    pub fn walker(&self) -> Box<dyn Walker> {
        self.0.walker()
    }

    pub fn eval(&self, sigma: &BitString, budget: Budget) -> EvalOutcome {
        eval(self, sigma, budget)
    }
}

impl fmt::Debug for StrategyProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StrategyProgram({})", self.0.id())
    }
}

/// Strategy given by an initial capital and a bet rule.
#[derive(Debug, Clone)]
pub struct BetStrategy {
    id: String,
    initial: Rat,
    rule: Arc<dyn BetRule>,
}

impl BetStrategy {
    pub fn new(id: impl Into<String>, initial: Rat, rule: Arc<dyn BetRule>) -> Self {
        assert!(initial.is_positive(), "initial capital must be positive");
        BetStrategy {
            id: id.into(),
            initial,
            rule,
        }
    }
}

impl Strategy for BetStrategy {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn initial_capital(&self) -> Rat {
        self.initial.clone()
    }

    fn walker(&self) -> Box<dyn Walker> {
        Box::new(BetWalker {
            rule: Arc::clone(&self.rule),
            position: BitString::empty(),
            capital: self.initial.clone(),
            cached: None,
        })
    }
}

#[derive(Clone)]
struct BetWalker {
    rule: Arc<dyn BetRule>,
    position: BitString,
    capital: Rat,
    cached: Option<Expansion>,
}

/// Children of `capital` under a stake of `fraction` on `side`.
pub fn split_capital(capital: &Rat, side: bool, fraction: &Rat) -> (Rat, Rat) {
    assert!(
        !fraction.is_negative() && *fraction < Rat::one(),
        "stake fraction {fraction} outside [0, 1)"
    );
    if fraction.is_zero() {
        return (capital.clone(), capital.clone());
    }
    let one = Rat::one();
    let win = capital * &(&one + fraction);
    let lose = capital * &(&one - fraction);
    if side {
        (lose, win)
    } else {
        (win, lose)
    }
}

impl Walker for BetWalker {
    fn position(&self) -> &BitString {
        &self.position
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        if let Some(e) = &self.cached {
            return e.clone();
        }
        let bet = self.rule.bet(&self.position);
        let steps = bet.steps();
        let e = match bet {
            Bet::Stake { side, fraction } | Bet::Costly { side, fraction, .. } => {
                let (zero, one) = split_capital(&self.capital, side, &fraction);
                Expansion::Split { zero, one, steps }
            }
            Bet::Diverge => Expansion::Diverge { steps },
        };
        self.cached = Some(e.clone());
        e
    }

    fn descend(&mut self, bit: bool) {
        let e = self.cached.take().unwrap_or_else(|| self.expand_uncached());
        match e {
            Expansion::Split { zero, one, .. } => {
                self.capital = if bit { one } else { zero };
                self.position.push(bit);
            }
            Expansion::Diverge { .. } => panic!("descend below a divergent node {}", self.position),
        }
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(self.clone())
    }
}

impl BetWalker {
    fn expand_uncached(&mut self) -> Expansion {
        self.expand();
        self.cached.take().expect("expansion cached")
    }
}

/// Step allowance for an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Budget(pub u64);

impl Budget {
    pub const UNLIMITED: Budget = Budget(u64::MAX);

    pub fn steps(n: u64) -> Budget {
        Budget(n)
    }
}

/// Outcome of evaluating a strategy on a string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EvalOutcome {
    Converged { value: Rat },
    Diverged,
    OutOfBudget { steps_used: u64 },
}

impl EvalOutcome {
    pub fn value(&self) -> Option<&Rat> {
        match self {
            EvalOutcome::Converged { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, EvalOutcome::Converged { .. })
    }
}

/// Evaluates `d(σ)` with at most `budget` steps spread over the bets at the
/// proper prefixes of σ.
pub fn eval(d: &StrategyProgram, sigma: &BitString, budget: Budget) -> EvalOutcome {
    let mut walker = d.walker();
    let mut used: u64 = 0;
    for bit in sigma.iter() {
        let e = walker.expand();
        let next = used.saturating_add(e.steps());
        if next > budget.0 {
            return EvalOutcome::OutOfBudget { steps_used: used };
        }
        used = next;
        match e {
            Expansion::Split { .. } => walker.descend(bit),
            Expansion::Diverge { .. } => return EvalOutcome::Diverged,
        }
    }
    EvalOutcome::Converged {
        value: walker.capital().clone(),
    }
}

/// Capitals of a strategy along every prefix of a play, `values[l] = d(X↾l)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapitalTrajectory {
    pub strategy_id: String,
    pub sequence_id: String,
    pub depth: usize,
    pub values: Vec<EvalOutcome>,
}

impl CapitalTrajectory {
    /// Largest converged capital along the play.
    pub fn max_converged(&self) -> Option<&Rat> {
        self.values.iter().filter_map(EvalOutcome::value).max()
    }

    pub fn first_divergence(&self) -> Option<usize> {
        self.values.iter().position(|v| matches!(v, EvalOutcome::Diverged))
    }
}

/// Plays `d` against the first `depth` bits of `z`.
pub fn play(d: &StrategyProgram, z: &SequenceProgram, depth: usize, budget: Budget) -> CapitalTrajectory {
    let bits = z.prefix(depth);
    play_bits(d, &bits, &z.id(), budget)
}

/// Plays `d` against a fixed string; the trajectory has `|bits| + 1` entries.
///
/// Incremental: one walker follows the string, so the work is linear in the
/// length times the per-node cost.
pub fn play_bits(d: &StrategyProgram, bits: &BitString, sequence_id: &str, budget: Budget) -> CapitalTrajectory {
    let mut values = Vec::with_capacity(bits.len() + 1);
    let mut walker = d.walker();
    let mut used: u64 = 0;
    values.push(EvalOutcome::Converged {
        value: walker.capital().clone(),
    });
    let mut stopped: Option<EvalOutcome> = None;
    for bit in bits.iter() {
        if let Some(s) = &stopped {
            values.push(s.clone());
            continue;
        }
        let e = walker.expand();
        let next = used.saturating_add(e.steps());
        if next > budget.0 {
            let s = EvalOutcome::OutOfBudget { steps_used: used };
            values.push(s.clone());
            stopped = Some(s);
            continue;
        }
        used = next;
        match e {
            Expansion::Split { .. } => {
                walker.descend(bit);
                values.push(EvalOutcome::Converged {
                    value: walker.capital().clone(),
                });
            }
            Expansion::Diverge { .. } => {
                values.push(EvalOutcome::Diverged);
                stopped = Some(EvalOutcome::Diverged);
            }
        }
    }
    CapitalTrajectory {
        strategy_id: d.id(),
        sequence_id: sequence_id.to_string(),
        depth: bits.len(),
        values,
    }
}

/// Finite surrogate for success along a play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Success {
    /// Capital first exceeded the threshold at this prefix length.
    ReachedAt { length: usize },
    /// Converged throughout and never exceeded the threshold.
    BoundedBelow { threshold: Rat },
    /// Became undefined at this prefix length before exceeding the threshold.
    DivergedAt { length: usize },
    /// Ran out of steps at this prefix length before exceeding the threshold.
    OutOfBudgetAt { length: usize },
}

pub fn assess_success(t: &CapitalTrajectory, k: &Rat) -> Success {
    for (l, v) in t.values.iter().enumerate() {
        match v {
            EvalOutcome::Converged { value } if value > k => return Success::ReachedAt { length: l },
            EvalOutcome::Converged { .. } => {}
            EvalOutcome::Diverged => return Success::DivergedAt { length: l },
            EvalOutcome::OutOfBudget { .. } => return Success::OutOfBudgetAt { length: l },
        }
    }
    Success::BoundedBelow { threshold: k.clone() }
}

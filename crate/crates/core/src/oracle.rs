//! Oracle strategies: betting programs that also read an oracle tape.
//!
//! Relativizing to a finite oracle prefix `w` yields an ordinary strategy.
//! The bet at τ sees only the first `u(|τ|+1)` oracle bits, so `d^w(σ)`
//! depends on at most `u(|σ|)` bits by construction. Reads past the end of
//! the supplied prefix return 0.

use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::bound::TimeBound;
use crate::martingale::{Bet, BetRule, BetStrategy, StrategyProgram};
use crate::rat::Rat;

pub trait OracleBetRule: Send + Sync + fmt::Debug {
    fn bet(&self, oracle: &BitString, history: &BitString) -> Bet;
}

/// A functional from oracles to (possibly partial) strategies.
pub trait OracleStrategy: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    /// Declared oracle-use bound as a function of the string length.
    fn use_bound(&self) -> Option<TimeBound>;
    fn relativize(&self, oracle: &BitString) -> StrategyProgram;
}

/// Shared handle to an oracle strategy.
#[derive(Clone)]
pub struct OracleProgram(Arc<dyn OracleStrategy>);

impl OracleProgram {
    pub fn new(d: impl OracleStrategy + 'static) -> Self {
        OracleProgram(Arc::new(d))
    }

    pub fn id(&self) -> String {
        self.0.id()
    }

    pub fn use_bound(&self) -> Option<TimeBound> {
        self.0.use_bound()
    }

    pub fn relativize(&self, oracle: &BitString) -> StrategyProgram {
        self.0.relativize(oracle)
    }
}

impl fmt::Debug for OracleProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleProgram({})", self.0.id())
    }
}

/// Oracle strategy given by an initial capital and an oracle bet rule.
#[derive(Debug, Clone)]
pub struct OracleBetStrategy {
    id: String,
    initial: Rat,
    use_bound: Option<TimeBound>,
    rule: Arc<dyn OracleBetRule>,
}

impl OracleBetStrategy {
    pub fn new(
        id: impl Into<String>,
        initial: Rat,
        use_bound: Option<TimeBound>,
        rule: Arc<dyn OracleBetRule>,
    ) -> Self {
        assert!(initial.is_positive(), "initial capital must be positive");
        OracleBetStrategy {
            id: id.into(),
            initial,
            use_bound,
            rule,
        }
    }

    /// The same strategy with no bets on strings shorter than `delay`.
    pub fn delayed(&self, delay: usize) -> OracleBetStrategy {
        OracleBetStrategy {
            id: format!("{}@delay{}", self.id, delay),
            initial: self.initial.clone(),
            use_bound: self.use_bound.clone(),
            rule: Arc::new(rules::Delay {
                inner: Arc::clone(&self.rule),
                delay,
            }),
        }
    }

    pub fn program(&self) -> OracleProgram {
        OracleProgram::new(self.clone())
    }
}

impl OracleStrategy for OracleBetStrategy {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn use_bound(&self) -> Option<TimeBound> {
        self.use_bound.clone()
    }

    fn relativize(&self, oracle: &BitString) -> StrategyProgram {
        let rule = Relativized {
            rule: Arc::clone(&self.rule),
            oracle: oracle.clone(),
            use_bound: self.use_bound.clone(),
        };
        StrategyProgram::new(BetStrategy::new(
            format!("{}^{}", self.id, oracle),
            self.initial.clone(),
            Arc::new(rule),
        ))
    }
}

#[derive(Debug)]
struct Relativized {
    rule: Arc<dyn OracleBetRule>,
    oracle: BitString,
    use_bound: Option<TimeBound>,
}

impl BetRule for Relativized {
    fn bet(&self, h: &BitString) -> Bet {
        match &self.use_bound {
            Some(u) => {
                let n = usize::try_from(u.at(h.len() + 1)).unwrap_or(usize::MAX);
                if n >= self.oracle.len() {
                    self.rule.bet(&self.oracle, h)
                } else {
                    self.rule.bet(&self.oracle.prefix(n), h)
                }
            }
            None => self.rule.bet(&self.oracle, h),
        }
    }
}

pub mod rules {
    //! Oracle bet rules used by the catalog.

    use super::*;

    fn read(oracle: &BitString, i: usize) -> bool {
        oracle.get(i).unwrap_or(false)
    }

    /// At τ, bets on oracle bit |τ|.
    #[derive(Debug, Clone)]
    pub struct Follow {
        pub fraction: Rat,
    }

    impl OracleBetRule for Follow {
        fn bet(&self, o: &BitString, h: &BitString) -> Bet {
            Bet::stake(read(o, h.len()), self.fraction.clone())
        }
    }

    /// Always bets on oracle bit 0.
    #[derive(Debug, Clone)]
    pub struct FirstBit {
        pub fraction: Rat,
    }

    impl OracleBetRule for FirstBit {
        fn bet(&self, o: &BitString, _: &BitString) -> Bet {
            Bet::stake(read(o, 0), self.fraction.clone())
        }
    }

    /// Bets on `side` at τ only when oracle bit |τ| is 1.
    #[derive(Debug, Clone)]
    pub struct Gated {
        pub side: bool,
        pub fraction: Rat,
    }

    impl OracleBetRule for Gated {
        fn bet(&self, o: &BitString, h: &BitString) -> Bet {
            if read(o, h.len()) {
                Bet::stake(self.side, self.fraction.clone())
            } else {
                Bet::none()
            }
        }
    }

    /// Bets on oracle bit |τ|; takes `slow` steps when that bit is 1.
    #[derive(Debug, Clone)]
    pub struct Costly {
        pub fraction: Rat,
        pub slow: u64,
    }

    impl OracleBetRule for Costly {
        fn bet(&self, o: &BitString, h: &BitString) -> Bet {
            let side = read(o, h.len());
            Bet::Costly {
                side,
                fraction: self.fraction.clone(),
                steps: if side { self.slow.max(1) } else { 1 },
            }
        }
    }

    /// Ignores the oracle.
    #[derive(Debug, Clone)]
    pub struct Oblivious {
        pub inner: Arc<dyn BetRule>,
    }

    impl OracleBetRule for Oblivious {
        fn bet(&self, _: &BitString, h: &BitString) -> Bet {
            self.inner.bet(h)
        }
    }

    /// Diverges at τ whenever oracle bit |τ| is 1; otherwise bets on 0.
    #[derive(Debug, Clone)]
    pub struct DivergeOnOne {
        pub fraction: Rat,
    }

    impl OracleBetRule for DivergeOnOne {
        fn bet(&self, o: &BitString, h: &BitString) -> Bet {
            if read(o, h.len()) {
                Bet::Diverge
            } else {
                Bet::stake(false, self.fraction.clone())
            }
        }
    }

    #[derive(Debug, Clone)]
    pub struct Delay {
        pub inner: Arc<dyn OracleBetRule>,
        pub delay: usize,
    }

    impl OracleBetRule for Delay {
        fn bet(&self, o: &BitString, h: &BitString) -> Bet {
            if h.len() < self.delay {
                Bet::none()
            } else {
                self.inner.bet(o, h)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::martingale::{Budget, EvalOutcome};

    fn follow() -> OracleBetStrategy {
        OracleBetStrategy::new(
            "follow",
            Rat::one(),
            Some(TimeBound::Affine { a: 1, b: 0 }),
            Arc::new(rules::Follow {
                fraction: Rat::frac(1, 2),
            }),
        )
    }

    #[test]
    fn relativized_bets_follow_oracle() {
        let d = follow();
        let v = |w: &str, s: &str| d.relativize(&bits(w)).eval(&bits(s), Budget::UNLIMITED);
        assert_eq!(v("01", "01"), EvalOutcome::Converged { value: Rat::frac(9, 4) });
        assert_eq!(v("11", "01"), EvalOutcome::Converged { value: Rat::frac(3, 4) });
    }

    #[test]
    fn use_bound_truncates_reads() {
        // A first-bit rule declared with u ≡ 0 never sees the oracle.
        let d = OracleBetStrategy::new(
            "blind",
            Rat::one(),
            Some(TimeBound::Constant(0)),
            Arc::new(rules::FirstBit {
                fraction: Rat::frac(1, 2),
            }),
        );
        let a = d.relativize(&bits("1")).eval(&bits("0"), Budget::UNLIMITED);
        let b = d.relativize(&bits("0")).eval(&bits("0"), Budget::UNLIMITED);
        assert_eq!(a, b);
    }

    #[test]
    fn delay_suppresses_early_bets() {
        let d = follow().delayed(2);
        let s = d.relativize(&bits("111"));
        assert_eq!(
            s.eval(&bits("00"), Budget::UNLIMITED),
            EvalOutcome::Converged { value: Rat::one() }
        );
        assert_eq!(
            s.eval(&bits("001"), Budget::UNLIMITED),
            EvalOutcome::Converged { value: Rat::frac(3, 2) }
        );
    }
}

//! Named strategies and sequences, and the config format that declares them.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::bound::{BoundError, TimeBound};
use crate::martingale::{Bet, BetRule, BetStrategy, StrategyProgram};
use crate::oracle::{OracleBetRule, OracleBetStrategy, OracleStrategy};
use crate::rat::Rat;
use crate::sequence::{self, SequenceProgram};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("positivity violation in {id}: stake {stake} outside [0, 1)")]
    Positivity { id: String, stake: Rat },
    #[error("strategy {id}: initial capital {initial} must be positive")]
    InitialCapital { id: String, initial: Rat },
    #[error("strategy {id}: side must be 0 or 1, got {side}")]
    Side { id: String, side: u8 },
    #[error("strategy {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate id {0}")]
    Duplicate(String),
    #[error("unknown id {0}")]
    Unknown(String),
    #[error("bound in {id}: {source}")]
    Bound { id: String, source: BoundError },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {reason}")]
    Parse { path: String, reason: String },
}

pub mod rules {
    //! Bet rules used by the catalog.

    use super::*;

    #[derive(Debug, Clone)]
    pub struct Never;

    impl BetRule for Never {
        fn bet(&self, _: &BitString) -> Bet {
            Bet::none()
        }
    }

    #[derive(Debug, Clone)]
    pub struct Fixed {
        pub side: bool,
        pub fraction: Rat,
    }

    impl BetRule for Fixed {
        fn bet(&self, _: &BitString) -> Bet {
            Bet::stake(self.side, self.fraction.clone())
        }
    }

    /// Bets on `pattern[|σ| mod len]`.
    #[derive(Debug, Clone)]
    pub struct Cycle {
        pub pattern: BitString,
        pub fraction: Rat,
    }

    impl BetRule for Cycle {
        fn bet(&self, h: &BitString) -> Bet {
            Bet::stake(self.pattern.bit(h.len() % self.pattern.len()), self.fraction.clone())
        }
    }

    /// Bets that the last bit repeats.
    #[derive(Debug, Clone)]
    pub struct FollowLast {
        pub fraction: Rat,
    }

    impl BetRule for FollowLast {
        fn bet(&self, h: &BitString) -> Bet {
            match h.last() {
                Some(b) => Bet::stake(b, self.fraction.clone()),
                None => Bet::none(),
            }
        }
    }

    /// Bets that the last bit flips.
    #[derive(Debug, Clone)]
    pub struct Contrarian {
        pub fraction: Rat,
    }

    impl BetRule for Contrarian {
        fn bet(&self, h: &BitString) -> Bet {
            match h.last() {
                Some(b) => Bet::stake(!b, self.fraction.clone()),
                None => Bet::none(),
            }
        }
    }

    /// Bets on the majority bit so far; no bet on ties.
    #[derive(Debug, Clone)]
    pub struct Majority {
        pub fraction: Rat,
    }

    impl BetRule for Majority {
        fn bet(&self, h: &BitString) -> Bet {
            let ones = h.count_ones();
            let zeros = h.len() - ones;
            match ones.cmp(&zeros) {
                std::cmp::Ordering::Equal => Bet::none(),
                o => Bet::stake(o == std::cmp::Ordering::Greater, self.fraction.clone()),
            }
        }
    }

    /// Follows the last bit, diverging once the history ends in a run of
    /// `run` equal bits.
    #[derive(Debug, Clone)]
    pub struct DivergeOnRun {
        pub run: usize,
        pub fraction: Rat,
    }

    impl BetRule for DivergeOnRun {
        fn bet(&self, h: &BitString) -> Bet {
            let Some(last) = h.last() else {
                return Bet::none();
            };
            let tail = h.bits().iter().rev().take_while(|&&b| b == last).count();
            if tail >= self.run {
                Bet::Diverge
            } else {
                Bet::stake(last, self.fraction.clone())
            }
        }
    }

    /// Bets on 1 until the history holds `count` ones, then diverges.
    #[derive(Debug, Clone)]
    pub struct HaltAfterOnes {
        pub count: usize,
        pub fraction: Rat,
    }

    impl BetRule for HaltAfterOnes {
        fn bet(&self, h: &BitString) -> Bet {
            if h.count_ones() >= self.count {
                Bet::Diverge
            } else {
                Bet::stake(true, self.fraction.clone())
            }
        }
    }

    /// Fixed bet, diverging at every history ending in `suffix`.
    #[derive(Debug, Clone)]
    pub struct DivergeOnSuffix {
        pub suffix: BitString,
        pub side: bool,
        pub fraction: Rat,
    }

    impl BetRule for DivergeOnSuffix {
        fn bet(&self, h: &BitString) -> Bet {
            let n = self.suffix.len();
            if h.len() >= n && h.bits()[h.len() - n..] == *self.suffix.bits() {
                Bet::Diverge
            } else {
                Bet::stake(self.side, self.fraction.clone())
            }
        }
    }

    /// Fixed bet, diverging at exactly one node.
    #[derive(Debug, Clone)]
    pub struct DivergeAt {
        pub node: BitString,
        pub side: bool,
        pub fraction: Rat,
    }

    impl BetRule for DivergeAt {
        fn bet(&self, h: &BitString) -> Bet {
            if *h == self.node {
                Bet::Diverge
            } else {
                Bet::stake(self.side, self.fraction.clone())
            }
        }
    }

    /// Attaches declared step costs to another rule's bets.
    #[derive(Debug, Clone)]
    pub struct WithCost {
        pub inner: Arc<dyn BetRule>,
        pub cost: Option<TimeBound>,
        pub nodes: BTreeMap<BitString, u64>,
    }

    impl BetRule for WithCost {
        fn bet(&self, h: &BitString) -> Bet {
            let steps = match self.nodes.get(h) {
                Some(s) => *s,
                None => match &self.cost {
                    Some(c) => c.at(h.len()),
                    None => return self.inner.bet(h),
                },
            }
            .max(1);
            match self.inner.bet(h) {
                Bet::Stake { side, fraction } | Bet::Costly { side, fraction, .. } => {
                    Bet::Costly { side, fraction, steps }
                }
                Bet::Diverge => Bet::Diverge,
            }
        }
    }

    /// Places no bet on histories shorter than `delay`.
    #[derive(Debug, Clone)]
    pub struct Delay {
        pub inner: Arc<dyn BetRule>,
        pub delay: usize,
    }

    impl BetRule for Delay {
        fn bet(&self, h: &BitString) -> Bet {
            if h.len() < self.delay {
                Bet::none()
            } else {
                self.inner.bet(h)
            }
        }
    }
}

fn default_one() -> Rat {
    Rat::one()
}

/// Bet rule of a catalog strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RuleSpec {
    Never,
    Fixed { side: u8, stake: Rat },
    Cycle { pattern: BitString, stake: Rat },
    FollowLast { stake: Rat },
    Contrarian { stake: Rat },
    Majority { stake: Rat },
    DivergeOnRun { run: usize, stake: Rat },
    HaltAfterOnes { count: usize, stake: Rat },
    DivergeOnSuffix { suffix: BitString, side: u8, stake: Rat },
    DivergeAt { node: BitString, side: u8, stake: Rat },
}

/// One strategy entry of a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub id: String,
    #[serde(flatten)]
    pub rule: RuleSpec,
    #[serde(default = "default_one")]
    pub initial: Rat,
    /// Declared steps per bet as a function of history length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<TimeBound>,
    /// Per-node step overrides.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub costly_nodes: Vec<(BitString, u64)>,
}

fn check_stake(id: &str, stake: &Rat) -> Result<(), CatalogError> {
    if stake.is_negative() || *stake >= Rat::one() {
        return Err(CatalogError::Positivity {
            id: id.to_string(),
            stake: stake.clone(),
        });
    }
    Ok(())
}

fn check_side(id: &str, side: u8) -> Result<bool, CatalogError> {
    match side {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(CatalogError::Side {
            id: id.to_string(),
            side,
        }),
    }
}

impl RuleSpec {
    pub fn stake(&self) -> Option<&Rat> {
        match self {
            RuleSpec::Never => None,
            RuleSpec::Fixed { stake, .. }
            | RuleSpec::Cycle { stake, .. }
            | RuleSpec::FollowLast { stake }
            | RuleSpec::Contrarian { stake }
            | RuleSpec::Majority { stake }
            | RuleSpec::DivergeOnRun { stake, .. }
            | RuleSpec::HaltAfterOnes { stake, .. }
            | RuleSpec::DivergeOnSuffix { stake, .. }
            | RuleSpec::DivergeAt { stake, .. } => Some(stake),
        }
    }

    /// Whether the rule can diverge somewhere.
    pub fn is_partial(&self) -> bool {
        matches!(
            self,
            RuleSpec::DivergeOnRun { .. }
                | RuleSpec::HaltAfterOnes { .. }
                | RuleSpec::DivergeOnSuffix { .. }
                | RuleSpec::DivergeAt { .. }
        )
    }

    pub fn build(&self, id: &str) -> Result<Arc<dyn BetRule>, CatalogError> {
        if let Some(stake) = self.stake() {
            check_stake(id, stake)?;
        }
        let invalid = |reason: &str| CatalogError::Invalid {
            id: id.to_string(),
            reason: reason.to_string(),
        };
        Ok(match self.clone() {
            RuleSpec::Never => Arc::new(rules::Never),
            RuleSpec::Fixed { side, stake } => Arc::new(rules::Fixed {
                side: check_side(id, side)?,
                fraction: stake,
            }),
            RuleSpec::Cycle { pattern, stake } => {
                if pattern.is_empty() {
                    return Err(invalid("empty cycle pattern"));
                }
                Arc::new(rules::Cycle {
                    pattern,
                    fraction: stake,
                })
            }
            RuleSpec::FollowLast { stake } => Arc::new(rules::FollowLast { fraction: stake }),
            RuleSpec::Contrarian { stake } => Arc::new(rules::Contrarian { fraction: stake }),
            RuleSpec::Majority { stake } => Arc::new(rules::Majority { fraction: stake }),
            RuleSpec::DivergeOnRun { run, stake } => {
                if run == 0 {
                    return Err(invalid("run length must be positive"));
                }
                Arc::new(rules::DivergeOnRun { run, fraction: stake })
            }
            RuleSpec::HaltAfterOnes { count, stake } => Arc::new(rules::HaltAfterOnes { count, fraction: stake }),
            RuleSpec::DivergeOnSuffix { suffix, side, stake } => {
                if suffix.is_empty() {
                    return Err(invalid("empty divergence suffix"));
                }
                Arc::new(rules::DivergeOnSuffix {
                    suffix,
                    side: check_side(id, side)?,
                    fraction: stake,
                })
            }
            RuleSpec::DivergeAt { node, side, stake } => Arc::new(rules::DivergeAt {
                node,
                side: check_side(id, side)?,
                fraction: stake,
            }),
        })
    }
}

impl StrategySpec {
    pub fn new(id: impl Into<String>, rule: RuleSpec) -> Self {
        StrategySpec {
            id: id.into(),
            rule,
            initial: Rat::one(),
            cost: None,
            costly_nodes: Vec::new(),
        }
    }

    pub fn with_cost(mut self, cost: TimeBound) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn build_rule(&self) -> Result<Arc<dyn BetRule>, CatalogError> {
        let rule = self.rule.build(&self.id)?;
        if let Some(c) = &self.cost {
            c.validate_cost().map_err(|source| CatalogError::Bound {
                id: self.id.clone(),
                source,
            })?;
        }
        if self.cost.is_none() && self.costly_nodes.is_empty() {
            return Ok(rule);
        }
        Ok(Arc::new(rules::WithCost {
            inner: rule,
            cost: self.cost.clone(),
            nodes: self.costly_nodes.iter().cloned().collect(),
        }))
    }

    pub fn build(&self) -> Result<StrategyProgram, CatalogError> {
        if !self.initial.is_positive() {
            return Err(CatalogError::InitialCapital {
                id: self.id.clone(),
                initial: self.initial.clone(),
            });
        }
        let rule = self.build_rule()?;
        Ok(StrategyProgram::new(BetStrategy::new(
            self.id.clone(),
            self.initial.clone(),
            rule,
        )))
    }
}

/// Bet rule of an oracle strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleRuleSpec {
    /// At τ, bets on oracle bit |τ|. Use bound u(n) = n.
    OracleFollow { stake: Rat },
    /// Always bets on oracle bit 0. Use bound u ≡ 1.
    OracleFirstBit { stake: Rat },
    /// At τ, bets on `side` only if oracle bit |τ| is 1. Use bound u(n) = n.
    OracleGated { side: u8, stake: Rat },
    /// Bets on oracle bit |τ| at a cost of `slow` steps when that bit is 1.
    OracleCostly { stake: Rat, slow: u64 },
    /// Ignores the oracle. Use bound u ≡ 0.
    Oblivious { rule: RuleSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleStrategySpec {
    pub id: String,
    #[serde(flatten)]
    pub rule: OracleRuleSpec,
}

impl OracleStrategySpec {
    pub fn build(&self) -> Result<OracleBetStrategy, CatalogError> {
        use crate::oracle::rules as orules;
        let id = self.id.as_str();
        let (rule, use_bound): (Arc<dyn OracleBetRule>, TimeBound) = match self.rule.clone() {
            OracleRuleSpec::OracleFollow { stake } => {
                check_stake(id, &stake)?;
                (
                    Arc::new(orules::Follow { fraction: stake }),
                    TimeBound::Affine { a: 1, b: 0 },
                )
            }
            OracleRuleSpec::OracleFirstBit { stake } => {
                check_stake(id, &stake)?;
                (Arc::new(orules::FirstBit { fraction: stake }), TimeBound::Constant(1))
            }
            OracleRuleSpec::OracleGated { side, stake } => {
                check_stake(id, &stake)?;
                (
                    Arc::new(orules::Gated {
                        side: check_side(id, side)?,
                        fraction: stake,
                    }),
                    TimeBound::Affine { a: 1, b: 0 },
                )
            }
            OracleRuleSpec::OracleCostly { stake, slow } => {
                check_stake(id, &stake)?;
                (
                    Arc::new(orules::Costly { fraction: stake, slow }),
                    TimeBound::Affine { a: 1, b: 0 },
                )
            }
            OracleRuleSpec::Oblivious { rule } => (
                Arc::new(orules::Oblivious { inner: rule.build(id)? }),
                TimeBound::Constant(0),
            ),
        };
        Ok(OracleBetStrategy::new(id, Rat::one(), Some(use_bound), rule))
    }
}

/// Sequence entry of a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSpec {
    Zeros,
    Ones,
    Alternating,
    ZeroThenOnes,
    ThueMorse,
    Counting,
    Periodic {
        id: String,
        prefix: BitString,
        cycle: BitString,
    },
}

impl SequenceSpec {
    pub fn id(&self) -> String {
        match self {
            SequenceSpec::Zeros => "zeros".into(),
            SequenceSpec::Ones => "ones".into(),
            SequenceSpec::Alternating => "alternating".into(),
            SequenceSpec::ZeroThenOnes => "zero-then-ones".into(),
            SequenceSpec::ThueMorse => "thue-morse".into(),
            SequenceSpec::Counting => "counting".into(),
            SequenceSpec::Periodic { id, .. } => id.clone(),
        }
    }

    pub fn build(&self) -> Result<SequenceProgram, CatalogError> {
        Ok(match self {
            SequenceSpec::Zeros => sequence::constant(false),
            SequenceSpec::Ones => sequence::constant(true),
            SequenceSpec::Alternating => sequence::alternating(),
            SequenceSpec::ZeroThenOnes => {
                sequence::periodic("zero-then-ones", BitString::zeros(1), BitString::from_bits([true]))
            }
            SequenceSpec::ThueMorse => sequence::thue_morse(),
            SequenceSpec::Counting => sequence::counting(),
            SequenceSpec::Periodic { id, prefix, cycle } => {
                if cycle.is_empty() {
                    return Err(CatalogError::Invalid {
                        id: id.clone(),
                        reason: "empty cycle".into(),
                    });
                }
                sequence::periodic(id.clone(), prefix.clone(), cycle.clone())
            }
        })
    }
}

/// Contents of a catalog file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub oracle_strategies: Vec<OracleStrategySpec>,
    #[serde(default)]
    pub sequences: Vec<SequenceSpec>,
}

/// A validated catalog.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub specs: CatalogFile,
    pub strategies: Vec<StrategyProgram>,
    pub oracle_strategies: Vec<OracleBetStrategy>,
    pub sequences: Vec<SequenceProgram>,
}

impl CatalogFile {
    pub fn parse(text: &str, path: &str) -> Result<Self, CatalogError> {
        let parse_err = |reason: String| CatalogError::Parse {
            path: path.to_string(),
            reason,
        };
        if path.ends_with(".json") {
            serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| parse_err(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: p.clone(),
            source,
        })?;
        Self::parse(&text, &p)
    }

    pub fn build(self) -> Result<Catalog, CatalogError> {
        let mut seen = std::collections::BTreeSet::new();
        let ids = self
            .strategies
            .iter()
            .map(|s| s.id.clone())
            .chain(self.oracle_strategies.iter().map(|s| s.id.clone()))
            .chain(self.sequences.iter().map(SequenceSpec::id));
        for id in ids {
            if !seen.insert(id.clone()) {
                return Err(CatalogError::Duplicate(id));
            }
        }
        let strategies = self
            .strategies
            .iter()
            .map(StrategySpec::build)
            .collect::<Result<_, _>>()?;
        let oracle_strategies = self
            .oracle_strategies
            .iter()
            .map(OracleStrategySpec::build)
            .collect::<Result<_, _>>()?;
        let sequences = self
            .sequences
            .iter()
            .map(SequenceSpec::build)
            .collect::<Result<_, _>>()?;
        Ok(Catalog {
            specs: self,
            strategies,
            oracle_strategies,
            sequences,
        })
    }
}

impl Catalog {
    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        CatalogFile::load(path)?.build()
    }

    pub fn strategy(&self, id: &str) -> Result<StrategyProgram, CatalogError> {
        self.strategies
            .iter()
            .find(|s| s.id() == id)
            .cloned()
            .ok_or_else(|| CatalogError::Unknown(id.to_string()))
    }

    pub fn sequence(&self, id: &str) -> Result<SequenceProgram, CatalogError> {
        self.sequences
            .iter()
            .find(|s| s.id() == id)
            .cloned()
            .ok_or_else(|| CatalogError::Unknown(id.to_string()))
    }

    pub fn oracle_strategy(&self, id: &str) -> Result<OracleBetStrategy, CatalogError> {
        self.oracle_strategies
            .iter()
            .find(|s| s.id() == id)
            .cloned()
            .ok_or_else(|| CatalogError::Unknown(id.to_string()))
    }

    /// Ids of strategies whose rule can diverge.
    pub fn partial_ids(&self) -> Vec<String> {
        self.specs
            .strategies
            .iter()
            .filter(|s| s.rule.is_partial())
            .map(|s| s.id.clone())
            .collect()
    }
}

fn r(n: i64, d: i64) -> Rat {
    Rat::frac(n, d)
}

/// The eight default strategies; the last three are partial.
pub fn default_strategies() -> Vec<StrategySpec> {
    vec![
        StrategySpec::new(
            "half-on-0",
            RuleSpec::Fixed {
                side: 0,
                stake: r(1, 2),
            },
        ),
        StrategySpec::new(
            "half-on-1",
            RuleSpec::Fixed {
                side: 1,
                stake: r(1, 2),
            },
        ),
        StrategySpec::new("follow-last", RuleSpec::FollowLast { stake: r(1, 3) }),
        StrategySpec::new("contrarian", RuleSpec::Contrarian { stake: r(1, 4) }),
        StrategySpec::new("majority", RuleSpec::Majority { stake: r(1, 5) }),
        StrategySpec::new("diverge-on-run", RuleSpec::DivergeOnRun { run: 4, stake: r(1, 3) }),
        StrategySpec::new(
            "halt-after-ones",
            RuleSpec::HaltAfterOnes {
                count: 3,
                stake: r(1, 4),
            },
        ),
        StrategySpec::new(
            "diverge-on-suffix",
            RuleSpec::DivergeOnSuffix {
                suffix: "101".parse().expect("literal"),
                side: 0,
                stake: r(1, 3),
            },
        ),
    ]
}

/// Strategies with declared bet costs, for time-bound experiments.
pub fn costly_strategies() -> Vec<StrategySpec> {
    let table = |rows: Vec<(usize, u64)>| TimeBound::cost_table(rows).expect("valid table");
    vec![
        StrategySpec::new(
            "costly-half-on-0",
            RuleSpec::Fixed {
                side: 0,
                stake: r(1, 2),
            },
        )
        .with_cost(TimeBound::Constant(3)),
        StrategySpec::new("costly-follow-last", RuleSpec::FollowLast { stake: r(1, 3) })
            .with_cost(TimeBound::Affine { a: 1, b: 1 }),
        StrategySpec::new("slow-start-contrarian", RuleSpec::Contrarian { stake: r(1, 4) })
            .with_cost(table(vec![(0, 1000), (10, 2)])),
        StrategySpec::new("slow-start-majority", RuleSpec::Majority { stake: r(1, 5) })
            .with_cost(table(vec![(0, 500), (10, 1)])),
        StrategySpec {
            costly_nodes: vec![("0".parse().expect("literal"), 100)],
            ..StrategySpec::new(
                "costly-node-0",
                RuleSpec::Fixed {
                    side: 1,
                    stake: r(1, 2),
                },
            )
        },
    ]
}

pub fn default_oracle_strategies() -> Vec<OracleStrategySpec> {
    let o = |id: &str, rule| OracleStrategySpec { id: id.into(), rule };
    vec![
        o("oracle-follow", OracleRuleSpec::OracleFollow { stake: r(1, 2) }),
        o("oracle-first-bit", OracleRuleSpec::OracleFirstBit { stake: r(1, 2) }),
        o(
            "oracle-gated",
            OracleRuleSpec::OracleGated {
                side: 0,
                stake: r(1, 3),
            },
        ),
        o(
            "oracle-costly",
            OracleRuleSpec::OracleCostly {
                stake: r(1, 4),
                slow: 50,
            },
        ),
        o(
            "oblivious-majority",
            OracleRuleSpec::Oblivious {
                rule: RuleSpec::Majority { stake: r(1, 5) },
            },
        ),
    ]
}

pub fn default_sequences() -> Vec<SequenceSpec> {
    vec![
        SequenceSpec::Zeros,
        SequenceSpec::Ones,
        SequenceSpec::Alternating,
        SequenceSpec::ZeroThenOnes,
        SequenceSpec::ThueMorse,
        SequenceSpec::Counting,
    ]
}

pub fn default_catalog_file() -> CatalogFile {
    CatalogFile {
        strategies: default_strategies(),
        oracle_strategies: default_oracle_strategies(),
        sequences: default_sequences(),
    }
}

pub fn default_catalog() -> Catalog {
    default_catalog_file().build().expect("default catalog is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::martingale::{eval, Budget, EvalOutcome};

    #[test]
    fn default_catalog_shape() {
        let c = default_catalog();
        assert_eq!(c.strategies.len(), 8);
        assert_eq!(c.partial_ids().len(), 3);
        assert!(c.strategy("majority").is_ok());
        assert!(matches!(c.strategy("nope"), Err(CatalogError::Unknown(_))));
    }

    #[test]
    fn stake_of_one_is_rejected() {
        let spec = StrategySpec::new(
            "bad",
            RuleSpec::Fixed {
                side: 0,
                stake: Rat::one(),
            },
        );
        assert!(matches!(spec.build(), Err(CatalogError::Positivity { .. })));
        let spec = StrategySpec::new(
            "bad",
            RuleSpec::Fixed {
                side: 2,
                stake: r(1, 2),
            },
        );
        assert!(matches!(spec.build(), Err(CatalogError::Side { .. })));
    }

    #[test]
    fn toml_roundtrip() {
        let text = r#"
            [[strategies]]
            id = "half-on-0"
            kind = "fixed"
            side = 0
            stake = "1/2"

            [[strategies]]
            id = "slow"
            kind = "majority"
            stake = "1/5"
            cost = { table = [[0, 100], [4, 1]] }
            costly_nodes = [["01", 7]]

            [[oracle_strategies]]
            id = "of"
            kind = "oracle-follow"
            stake = "1/2"

            [[sequences]]
            kind = "thue-morse"
        "#;
        let file = CatalogFile::parse(text, "x.toml").unwrap();
        assert_eq!(file.strategies[1].cost.as_ref().unwrap().at(5), 1);
        let back = toml::to_string(&file).unwrap();
        assert_eq!(CatalogFile::parse(&back, "x.toml").unwrap(), file);
        let c = file.build().unwrap();
        assert_eq!(
            eval(&c.strategies[0], &bits("00"), Budget::UNLIMITED),
            EvalOutcome::Converged { value: r(9, 4) }
        );
        let json = serde_json::to_string(&c.specs).unwrap();
        assert_eq!(CatalogFile::parse(&json, "x.json").unwrap(), c.specs);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut f = default_catalog_file();
        f.strategies.push(f.strategies[0].clone());
        assert!(matches!(f.build(), Err(CatalogError::Duplicate(_))));
    }

    #[test]
    fn partial_rules_diverge_where_declared() {
        let c = default_catalog();
        let run = c.strategy("diverge-on-run").unwrap();
        assert_eq!(run.eval(&bits("00001"), Budget::UNLIMITED), EvalOutcome::Diverged);
        assert!(run.eval(&bits("0001"), Budget::UNLIMITED).is_converged());
        let halt = c.strategy("halt-after-ones").unwrap();
        assert_eq!(halt.eval(&bits("101010"), Budget::UNLIMITED), EvalOutcome::Diverged);
        assert_eq!(
            halt.eval(&bits("11"), Budget::UNLIMITED),
            EvalOutcome::Converged { value: r(25, 16) }
        );
        let suf = c.strategy("diverge-on-suffix").unwrap();
        assert_eq!(suf.eval(&bits("1010"), Budget::UNLIMITED), EvalOutcome::Diverged);
    }

    #[test]
    fn costs_are_charged() {
        let s = costly_strategies()[0].build().unwrap();
        assert_eq!(
            s.eval(&bits("00"), Budget::steps(5)),
            EvalOutcome::OutOfBudget { steps_used: 3 }
        );
        assert!(s.eval(&bits("00"), Budget::steps(6)).is_converged());
    }
}

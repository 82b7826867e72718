//! Computable orders, enumerable requirement sets and the fireworks protocol.
//!
//! A run keeps a current condition `p`. Each requirement `W_e` holds a hidden
//! counter `c_e` drawn uniformly from `1..=N_e`. Every round each unmet
//! requirement looks at its enumeration below `p`; the first item it has not
//! offered before is an offer and decrements the counter. When the counter
//! reaches zero the run commits to that item if it extends `p`; otherwise the
//! requirement is abandoned for the rest of the run. Every round starts by
//! extending `p` one level without betting.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::finite::{order_extends, FiniteMartingale};
use crate::martingale::StrategyProgram;
use crate::rat::Rat;
use crate::sequence::{rng, SequenceProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireworksError {
    #[error("{requirements} requirements but {thresholds} thresholds")]
    Thresholds { requirements: usize, thresholds: usize },
    #[error("threshold N_{0} must be at least 1")]
    ZeroThreshold(usize),
    #[error("budget growth must be positive")]
    ZeroBudget,
}

/// A computable partial order of conditions with a least-informative root.
pub trait Order {
    type Condition: Clone + Eq + Hash + fmt::Debug + Serialize;

    fn root(&self) -> Self::Condition;
    /// `q ≤ p`: q carries at least the information of p.
    fn extends(&self, q: &Self::Condition, p: &Self::Condition) -> bool;
    /// Canonical one-step extension.
    fn default_extend(&self, p: &Self::Condition) -> Self::Condition;
    fn length(&self, p: &Self::Condition) -> usize;
    /// A condition of greater length incompatible with `p`, if one exists.
    fn incompatible(&self, p: &Self::Condition) -> Option<Self::Condition>;
}

/// Finite martingales ordered by extension.
#[derive(Debug, Clone, Copy, Default)]
pub struct MartingaleOrder;

impl Order for MartingaleOrder {
    type Condition = FiniteMartingale;

    fn root(&self) -> FiniteMartingale {
        FiniteMartingale::root()
    }

    fn extends(&self, q: &FiniteMartingale, p: &FiniteMartingale) -> bool {
        order_extends(q, p)
    }

    fn default_extend(&self, p: &FiniteMartingale) -> FiniteMartingale {
        p.default_extend()
    }

    fn length(&self, p: &FiniteMartingale) -> usize {
        p.length()
    }

    /// Same length plus one, with a different split at the root.
    fn incompatible(&self, p: &FiniteMartingale) -> Option<FiniteMartingale> {
        let mut q = FiniteMartingale::root().with_length(p.length() + 1);
        let split = if p.value(&BitString::from_bits([false])) == Rat::frac(3, 2) {
            (Rat::frac(5, 4), Rat::frac(3, 4))
        } else {
            (Rat::frac(3, 2), Rat::frac(1, 2))
        };
        q.set_children(&BitString::empty(), split.0, split.1);
        Some(q)
    }
}

/// Binary strings ordered by prefix extension.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrefixOrder;

impl Order for PrefixOrder {
    type Condition = BitString;

    fn root(&self) -> BitString {
        BitString::empty()
    }

    fn extends(&self, q: &BitString, p: &BitString) -> bool {
        p.is_prefix_of(q)
    }

    fn default_extend(&self, p: &BitString) -> BitString {
        p.child(false)
    }

    fn length(&self, p: &BitString) -> usize {
        p.len()
    }

    fn incompatible(&self, p: &BitString) -> Option<BitString> {
        let first = p.get(0)?;
        let mut q = BitString::from_bits([!first]);
        while q.len() <= p.len() {
            q.push(false);
        }
        Some(q)
    }
}

/// A c.e. set of conditions, enumerated below a given condition with a step
/// budget. The returned list only grows with the budget.
pub trait Enumerator<C>: Send + Sync {
    fn id(&self) -> String;
    fn enumerate(&self, below: &C, budget: u64) -> Vec<C>;
}

/// Conditions of length at least `n`.
#[derive(Debug, Clone)]
pub struct LengthDense<O> {
    pub order: O,
    pub n: usize,
}

pub fn length_dense_set<O: Order>(order: O, n: usize) -> LengthDense<O> {
    LengthDense { order, n }
}

impl<O: Order> LengthDense<O> {
    pub fn contains(&self, p: &O::Condition) -> bool {
        self.order.length(p) >= self.n
    }
}

impl<O: Order + Send + Sync> Enumerator<O::Condition> for LengthDense<O> {
    fn id(&self) -> String {
        format!("length>={}", self.n)
    }

    /// Offers the no-bet extension of `below` by `n` levels, one step per
    /// level. The offer changes whenever `below` does.
    fn enumerate(&self, below: &O::Condition, budget: u64) -> Vec<O::Condition> {
        if self.n as u64 > budget {
            return Vec::new();
        }
        let mut q = below.clone();
        for _ in 0..self.n {
            q = self.order.default_extend(&q);
        }
        vec![q]
    }
}

/// Capital witness: from `f`, double (damped by δ) along Z until the
/// capital on Z exceeds `k`.
///
/// At each new level along Z the capital is multiplied by `2 − δ` on the bit
/// of Z and by `δ` on the other bit; strings off Z keep their capital.
pub fn doubling_witness(f: &FiniteMartingale, z: &SequenceProgram, k: &Rat, delta: &Rat) -> FiniteMartingale {
    assert!(
        delta.is_positive() && *delta < Rat::one(),
        "damping {delta} outside (0, 1)"
    );
    let up = Rat::int(2) - delta;
    let n = f.length();
    let mut sigma = z.prefix(n);
    let mut v = f.value(&sigma);
    let mut g = f.clone();
    while &v <= k {
        g = g.default_extend();
        let b = z.bit(sigma.len());
        let (win, lose) = (&v * &up, &v * delta);
        if b {
            g.set_children(&sigma, lose, win.clone());
        } else {
            g.set_children(&sigma, win.clone(), lose);
        }
        v = win;
        sigma.push(b);
    }
    g
}

/// Length of [`doubling_witness`] without building it.
pub fn witness_len(f: &FiniteMartingale, z: &SequenceProgram, k: &Rat, delta: &Rat) -> usize {
    let up = Rat::int(2) - delta;
    let mut v = f.value(&z.prefix(f.length()));
    let mut m = f.length();
    while &v <= k {
        v = &v * &up;
        m += 1;
    }
    m
}

/// `{g : g(Z↾l) > k for some l ≤ lh(g)}`, enumerated through doubling
/// witnesses over a fixed damping grid.
#[derive(Debug, Clone)]
pub struct DenseCapitalSet {
    pub z: SequenceProgram,
    pub k: Rat,
    pub deltas: Vec<Rat>,
}

pub fn dense_capital_set(z: SequenceProgram, k: Rat) -> DenseCapitalSet {
    assert!(k >= Rat::one(), "capital target below 1");
    DenseCapitalSet {
        z,
        k,
        deltas: vec![Rat::frac(1, 2), Rat::frac(1, 4), Rat::frac(1, 8)],
    }
}

impl DenseCapitalSet {
    /// Least `l ≤ lh(g)` with `g(Z↾l) > k`.
    pub fn first_hit(&self, g: &FiniteMartingale) -> Option<usize> {
        g.values_along(&self.z.prefix(g.length()))
            .into_iter()
            .position(|v| v > self.k)
    }

    pub fn contains(&self, g: &FiniteMartingale) -> bool {
        self.first_hit(g).is_some()
    }
}

impl Enumerator<FiniteMartingale> for DenseCapitalSet {
    fn id(&self) -> String {
        format!("capital>{}@{}", self.k, self.z.id())
    }

    /// Computing `Z↾m` costs its declared bit costs; items whose witness needs
    /// more than `budget` steps are not reached.
    fn enumerate(&self, below: &FiniteMartingale, budget: u64) -> Vec<FiniteMartingale> {
        let mut out = Vec::new();
        if self.z.prefix_cost(below.length()) > budget {
            return out;
        }
        if self.contains(below) {
            out.push(below.clone());
        }
        for delta in &self.deltas {
            let m = witness_len(below, &self.z, &self.k, delta);
            if self.z.prefix_cost(m) > budget {
                break;
            }
            let g = doubling_witness(below, &self.z, &self.k, delta);
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }
}

/// Enumerator that is honest except that its `guess`-th offer is off-chain.
///
/// It is oblivious: the offer count is read off the condition's length,
/// which equals the round number when it is the only requirement.
#[derive(Debug, Clone)]
pub struct Adversary<O> {
    pub order: O,
    pub guess: usize,
}

impl<O: Order + Send + Sync> Enumerator<O::Condition> for Adversary<O> {
    fn id(&self) -> String {
        format!("adversary@{}", self.guess)
    }

    fn enumerate(&self, below: &O::Condition, _budget: u64) -> Vec<O::Condition> {
        if self.order.length(below) == self.guess {
            if let Some(q) = self.order.incompatible(below) {
                return vec![q];
            }
        }
        vec![self.order.default_extend(below)]
    }
}

/// Enumerator of the empty set.
#[derive(Debug, Clone, Copy)]
pub struct EmptySet;

impl<C> Enumerator<C> for EmptySet {
    fn id(&self) -> String {
        "empty".into()
    }

    fn enumerate(&self, _: &C, _: u64) -> Vec<C> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireworksParams {
    /// `N_e` for each requirement.
    pub thresholds: Vec<u64>,
    pub rounds: usize,
    /// Enumeration budget in round `r` is `budget_growth·r`.
    pub budget_growth: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RequirementStatus {
    Met {
        round: usize,
        offers: u64,
        chain_index: usize,
    },
    /// Not met within the run. `abandoned` marks a counter that ran out on an
    /// item not extending the current condition.
    Undetermined {
        offers: u64,
        last_offer_round: Option<usize>,
        abandoned: bool,
    },
}

impl RequirementStatus {
    pub fn is_met(&self) -> bool {
        matches!(self, RequirementStatus::Met { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainStep {
    Root,
    Commit { requirement: usize },
    Extend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink<C> {
    pub round: usize,
    pub step: ChainStep,
    pub condition: C,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireworksRun<C> {
    pub seed: u64,
    pub counters: Vec<u64>,
    pub statuses: Vec<RequirementStatus>,
    pub chain: Vec<ChainLink<C>>,
}

impl<C> FireworksRun<C> {
    pub fn final_condition(&self) -> &C {
        &self.chain.last().expect("chain has a root").condition
    }

    pub fn all_met(&self) -> bool {
        self.statuses.iter().all(RequirementStatus::is_met)
    }
}

pub fn requirement_status<C>(run: &FireworksRun<C>, e: usize) -> &RequirementStatus {
    &run.statuses[e]
}

struct Tracker<C> {
    remaining: u64,
    offers: u64,
    last_offer_round: Option<usize>,
    seen: HashSet<C>,
    done: Option<RequirementStatus>,
}

/// Runs the protocol for `params.rounds` rounds; deterministic in `seed`.
pub fn fireworks_run<O: Order>(
    order: &O,
    requirements: &[&dyn Enumerator<O::Condition>],
    params: &FireworksParams,
    seed: u64,
) -> Result<FireworksRun<O::Condition>, FireworksError> {
    if params.thresholds.len() != requirements.len() {
        return Err(FireworksError::Thresholds {
            requirements: requirements.len(),
            thresholds: params.thresholds.len(),
        });
    }
    if let Some(e) = params.thresholds.iter().position(|&n| n == 0) {
        return Err(FireworksError::ZeroThreshold(e));
    }
    if params.budget_growth == 0 {
        return Err(FireworksError::ZeroBudget);
    }
    let mut rand = rng(seed);
    let counters: Vec<u64> = params.thresholds.iter().map(|&n| rand.random_range(1..=n)).collect();
    let mut trackers: Vec<Tracker<O::Condition>> = counters
        .iter()
        .map(|&c| Tracker {
            remaining: c,
            offers: 0,
            last_offer_round: None,
            seen: HashSet::new(),
            done: None,
        })
        .collect();
    let mut p = order.root();
    let mut chain = vec![ChainLink {
        round: 0,
        step: ChainStep::Root,
        condition: p.clone(),
    }];
    for round in 1..=params.rounds {
        let budget = params.budget_growth.saturating_mul(round as u64);
        p = order.default_extend(&p);
        chain.push(ChainLink {
            round,
            step: ChainStep::Extend,
            condition: p.clone(),
        });
        for (e, (req, t)) in requirements.iter().zip(trackers.iter_mut()).enumerate() {
            if t.done.is_some() {
                continue;
            }
            let Some(q) = req.enumerate(&p, budget).into_iter().find(|q| !t.seen.contains(q)) else {
                continue;
            };
            t.seen.insert(q.clone());
            t.offers += 1;
            t.last_offer_round = Some(round);
            t.remaining -= 1;
            if t.remaining > 0 {
                continue;
            }
            if order.extends(&q, &p) {
                p = q;
                chain.push(ChainLink {
                    round,
                    step: ChainStep::Commit { requirement: e },
                    condition: p.clone(),
                });
                t.done = Some(RequirementStatus::Met {
                    round,
                    offers: t.offers,
                    chain_index: chain.len() - 1,
                });
            } else {
                t.done = Some(RequirementStatus::Undetermined {
                    offers: t.offers,
                    last_offer_round: t.last_offer_round,
                    abandoned: true,
                });
            }
        }
    }
    let statuses = trackers
        .into_iter()
        .map(|t| {
            t.done.unwrap_or(RequirementStatus::Undetermined {
                offers: t.offers,
                last_offer_round: t.last_offer_round,
                abandoned: false,
            })
        })
        .collect();
    Ok(FireworksRun {
        seed,
        counters,
        statuses,
        chain,
    })
}

/// The union of the chain, as a strategy that stops betting past the final
/// length.
pub fn generic_martingale(run: &FireworksRun<FiniteMartingale>) -> StrategyProgram {
    run.final_condition().to_strategy(format!("generic@{}", run.seed))
}

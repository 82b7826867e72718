//! Diagonalization against weighted families and the staged sequence Δ.
//!
//! Against a family `(d_1,q_1), …, (d_n,q_n)` above σ, the diagonal sequence
//! extends σ bit by bit, choosing 0 exactly when the weighted capital of the
//! members defined on both children stays below 1 after a 0. The weighted
//! sum therefore never reaches 1 along the sequence.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::martingale::{Expansion, StrategyProgram, Walker};
use crate::rat::{weighted_sum_cmp, Rat};
use crate::sequence::{Registry, Sequence, SequenceProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagError {
    #[error("weighted capital {sum} at {sigma} is not below 1")]
    Precondition { sigma: BitString, sum: Rat },
    #[error("weight {0} must be positive")]
    Weight(Rat),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("gap for code {0} must be positive")]
    ZeroGap(usize),
    #[error("invalid gap spec {0:?}")]
    GapSpec(String),
}

/// A family of strategies with positive weights.
pub type WeightedFamily = Vec<(StrategyProgram, Rat)>;

/// Walkers of the members still defined at the current node.
type Frontier = Vec<(Box<dyn Walker>, Rat)>;

fn walk_to(d: &StrategyProgram, sigma: &BitString) -> (Option<Box<dyn Walker>>, Rat) {
    let mut w = d.walker();
    let mut max = w.capital().clone();
    for b in sigma.iter() {
        match w.expand() {
            Expansion::Split { .. } => w.descend(b),
            Expansion::Diverge { .. } => return (None, max),
        }
        if w.capital() > &max {
            max = w.capital().clone();
        }
    }
    (Some(w), max)
}

fn frontier_sum(frontier: &Frontier) -> Rat {
    frontier.iter().map(|(w, q)| w.capital() * q).sum()
}

/// Advances every member by one diagonal bit; returns the bit and its cost.
fn diagonal_step(frontier: &mut Frontier) -> (bool, u64) {
    let mut steps = 0u64;
    let mut zeros: Vec<(Rat, Rat)> = Vec::with_capacity(frontier.len());
    frontier.retain_mut(|(w, q)| {
        let e = w.expand();
        steps = steps.saturating_add(e.steps());
        match e {
            Expansion::Split { zero, .. } => {
                zeros.push((q.clone(), zero));
                true
            }
            Expansion::Diverge { .. } => false,
        }
    });
    let bit = weighted_sum_cmp(zeros.iter().map(|(q, v)| (q, v)), &Rat::one()) != Ordering::Less;
    for (w, _) in frontier.iter_mut() {
        w.descend(bit);
    }
    (bit, steps)
}

/// Sum of `q_i·d_i(σ)` over the members defined at σ.
pub fn converged_sum(family: &[(StrategyProgram, Rat)], sigma: &BitString) -> Rat {
    family
        .iter()
        .filter_map(|(d, q)| walk_to(d, sigma).0.map(|w| w.capital() * q))
        .sum()
}

/// Largest `2^-k` not above `x`, for `0 < x ≤ 1`.
fn dyadic_floor(x: &Rat) -> Rat {
    let mut k: i64 = 0;
    let mut p = Rat::one();
    while &p > x {
        k += 1;
        p = Rat::pow2(-k);
    }
    p
}

/// Weight for a member introduced at σ.
///
/// With `S` the weighted capital of the current family at σ and `M` the
/// largest capital of `d_new` on the prefixes of σ where it is defined, the
/// weight is the largest power of two not above `(1 − S)/(2·max(1, M))`.
/// Hence `q·d_new ≤ (1 − S)/2` on every prefix of σ.
pub fn pick_weight(
    sigma: &BitString,
    family: &[(StrategyProgram, Rat)],
    d_new: &StrategyProgram,
) -> Result<Rat, DiagError> {
    let s = converged_sum(family, sigma);
    if s >= Rat::one() {
        return Err(DiagError::Precondition {
            sigma: sigma.clone(),
            sum: s,
        });
    }
    let (_, m) = walk_to(d_new, sigma);
    let m = m.max(Rat::one());
    Ok(dyadic_floor(&((Rat::one() - s) / (m * Rat::int(2)))))
}

/// The diagonal sequence against a family above σ.
pub struct DiagonalSequence {
    id: String,
    sigma: BitString,
    state: Mutex<DiagState>,
}

struct DiagState {
    frontier: Frontier,
    bits: BitString,
    costs: Vec<u64>,
}

impl DiagonalSequence {
    fn from_frontier(id: String, sigma: BitString, frontier: Frontier) -> Self {
        let n = sigma.len();
        DiagonalSequence {
            id,
            sigma: sigma.clone(),
            state: Mutex::new(DiagState {
                frontier,
                bits: sigma,
                costs: vec![1; n],
            }),
        }
    }

    fn with_state<T>(&self, n: usize, f: impl FnOnce(&DiagState) -> T) -> T {
        let mut st = self.state.lock().expect("diagonal state");
        while st.bits.len() < n {
            let (bit, cost) = diagonal_step(&mut st.frontier);
            st.bits.push(bit);
            st.costs.push(cost);
        }
        f(&st)
    }

    pub fn anchor(&self) -> &BitString {
        &self.sigma
    }
}

impl fmt::Debug for DiagonalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiagonalSequence({})", self.id)
    }
}

impl Sequence for DiagonalSequence {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn bit(&self, n: usize) -> bool {
        self.with_state(n + 1, |st| st.bits.bit(n))
    }

    fn cost(&self, n: usize) -> u64 {
        self.with_state(n + 1, |st| st.costs[n])
    }

    fn prefix(&self, n: usize) -> BitString {
        self.with_state(n, |st| st.bits.prefix(n))
    }

    fn prefix_cost(&self, n: usize) -> u64 {
        self.with_state(n, |st| st.costs[..n].iter().fold(0u64, |a, &c| a.saturating_add(c)))
    }
}

/// Diagonalization against `family` above σ.
pub fn diagonalize_finite(family: &[(StrategyProgram, Rat)], sigma: &BitString) -> Result<SequenceProgram, DiagError> {
    diagonalize_named("diag", family, sigma)
}

fn diagonalize_named(
    id: &str,
    family: &[(StrategyProgram, Rat)],
    sigma: &BitString,
) -> Result<SequenceProgram, DiagError> {
    let mut frontier = Frontier::new();
    for (d, q) in family {
        if !q.is_positive() {
            return Err(DiagError::Weight(q.clone()));
        }
        if let (Some(w), _) = walk_to(d, sigma) {
            frontier.push((w, q.clone()));
        }
    }
    let sum = frontier_sum(&frontier);
    if sum >= Rat::one() {
        return Err(DiagError::Precondition {
            sigma: sigma.clone(),
            sum,
        });
    }
    Ok(SequenceProgram::new(DiagonalSequence::from_frontier(
        id.to_string(),
        sigma.clone(),
        frontier,
    )))
}

/// The gap function `e ↦ t_e`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSpec {
    Constant(usize),
    /// `a·e + b`.
    Linear {
        a: usize,
        b: usize,
    },
    /// `t_e` for each listed code; the last value repeats.
    Table(Vec<usize>),
}

impl GapSpec {
    pub fn at(&self, e: usize) -> usize {
        match self {
            GapSpec::Constant(t) => *t,
            GapSpec::Linear { a, b } => a.saturating_mul(e).saturating_add(*b),
            GapSpec::Table(ts) => *ts.get(e).or(ts.last()).unwrap_or(&0),
        }
    }
}

impl FromStr for GapSpec {
    type Err = DiagError;

    /// `const:N`, `linear:A,B` or `table:T0,T1,…`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DiagError::GapSpec(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums = rest
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match (kind, nums.as_slice()) {
            ("const", [t]) => Ok(GapSpec::Constant(*t)),
            ("linear", [a, b]) => Ok(GapSpec::Linear { a: *a, b: *b }),
            ("table", ts) if !ts.is_empty() => Ok(GapSpec::Table(ts.to_vec())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapSpec::Constant(t) => write!(f, "const:{t}"),
            GapSpec::Linear { a, b } => write!(f, "linear:{a},{b}"),
            GapSpec::Table(ts) => {
                let parts: Vec<String> = ts.iter().map(usize::to_string).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

/// One stage of the Δ construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub sigma_len: usize,
    /// Strategy introduced at this stage and its weight, if any remained.
    pub introduced: Option<String>,
    pub weight: Option<Rat>,
    pub code: usize,
    pub gap: usize,
}

impl StageRecord {
    /// Length up to which Δ copies the stage's diagonal sequence.
    pub fn agreement_len(&self) -> usize {
        self.sigma_len + self.gap
    }
}

/// A prefix of Δ with its stage log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaResult {
    pub bits: BitString,
    pub stages: Vec<StageRecord>,
    /// Every introduced strategy with its weight.
    pub family: Vec<(String, Rat)>,
    /// Ids of the registered sequences, by code.
    pub registry_ids: Vec<String>,
    #[serde(skip)]
    pub registry: Option<Arc<Registry>>,
}

/// Stage-by-stage construction of Δ.
pub struct DeltaBuilder {
    catalog: Vec<StrategyProgram>,
    family: WeightedFamily,
    frontier: Frontier,
    sigma: BitString,
    registry: Arc<Registry>,
    stages: Vec<StageRecord>,
    pending: Option<PendingStage>,
}

/// A stage whose diagonal sequence is registered but whose gap is not yet
/// fixed.
#[derive(Debug, Clone)]
pub struct PendingStage {
    pub stage: usize,
    pub code: usize,
    pub sequence: SequenceProgram,
    pub sigma_len: usize,
    introduced: Option<(String, Rat)>,
}

impl DeltaBuilder {
    pub fn new(catalog: Vec<StrategyProgram>) -> Result<Self, DiagError> {
        Self::with_registry(catalog, Arc::new(Registry::new()))
    }

    /// Uses `registry` for the codes; sequences already in it shift them.
    pub fn with_registry(catalog: Vec<StrategyProgram>, registry: Arc<Registry>) -> Result<Self, DiagError> {
        if catalog.is_empty() {
            return Err(DiagError::EmptyCatalog);
        }
        Ok(DeltaBuilder {
            catalog,
            family: Vec::new(),
            frontier: Vec::new(),
            sigma: BitString::empty(),
            registry,
            stages: Vec::new(),
            pending: None,
        })
    }

    pub fn sigma(&self) -> &BitString {
        &self.sigma
    }

    pub fn family(&self) -> &WeightedFamily {
        &self.family
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Whether every catalog strategy has been introduced.
    pub fn catalog_exhausted(&self) -> bool {
        self.family.len() >= self.catalog.len()
    }

    /// Introduces the next strategy, forms the diagonal sequence above the
    /// current σ and registers it.
    pub fn begin_stage(&mut self) -> Result<PendingStage, DiagError> {
        if let Some(p) = &self.pending {
            return Ok(p.clone());
        }
        let stage = self.stages.len();
        let mut introduced = None;
        if let Some(d) = self.catalog.get(self.family.len()).cloned() {
            let q = pick_weight(&self.sigma, &self.family, &d)?;
            if let (Some(w), _) = walk_to(&d, &self.sigma) {
                self.frontier.push((w, q.clone()));
            }
            introduced = Some((d.id(), q.clone()));
            self.family.push((d, q));
        }
        let frontier: Frontier = self.frontier.iter().map(|(w, q)| (w.fork(), q.clone())).collect();
        let sum = frontier_sum(&frontier);
        if sum >= Rat::one() {
            return Err(DiagError::Precondition {
                sigma: self.sigma.clone(),
                sum,
            });
        }
        let code_hint = self.registry.len();
        let sequence = SequenceProgram::new(DiagonalSequence::from_frontier(
            format!("Z{stage}[{code_hint}]"),
            self.sigma.clone(),
            frontier,
        ));
        let code = self.registry.register(sequence.clone());
        let p = PendingStage {
            stage,
            code,
            sequence,
            sigma_len: self.sigma.len(),
            introduced,
        };
        self.pending = Some(p.clone());
        Ok(p)
    }

    /// Copies `gap` bits of the pending stage's diagonal sequence into Δ.
    pub fn commit_stage(&mut self, gap: usize) -> Result<StageRecord, DiagError> {
        let p = match self.pending.take() {
            Some(p) => p,
            None => self
                .begin_stage()
                .and_then(|_| self.pending.take().ok_or(DiagError::EmptyCatalog))?,
        };
        if gap == 0 {
            self.pending = Some(p.clone());
            return Err(DiagError::ZeroGap(p.code));
        }
        for _ in 0..gap {
            let (bit, _) = diagonal_step(&mut self.frontier);
            self.sigma.push(bit);
        }
        let (introduced, weight) = match p.introduced {
            Some((id, q)) => (Some(id), Some(q)),
            None => (None, None),
        };
        let record = StageRecord {
            stage: p.stage,
            sigma_len: p.sigma_len,
            introduced,
            weight,
            code: p.code,
            gap,
        };
        self.stages.push(record.clone());
        Ok(record)
    }

    /// Runs one full stage with the gap `t_e` of the registered code.
    pub fn stage(&mut self, gap: &GapSpec) -> Result<StageRecord, DiagError> {
        let p = self.begin_stage()?;
        self.commit_stage(gap.at(p.code))
    }

    pub fn finish(self) -> DeltaResult {
        DeltaResult {
            bits: self.sigma,
            stages: self.stages,
            family: self.family.iter().map(|(d, q)| (d.id(), q.clone())).collect(),
            registry_ids: self.registry.ids(),
            registry: Some(self.registry),
        }
    }
}

/// Stages until `|σ| ≥ depth`.
pub fn build_delta(gap: &GapSpec, catalog: &[StrategyProgram], depth: usize) -> Result<DeltaResult, DiagError> {
    let mut b = DeltaBuilder::new(catalog.to_vec())?;
    while b.sigma().len() < depth {
        b.stage(gap)?;
    }
    Ok(b.finish())
}

/// Agreement check for one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCheck {
    pub stage: usize,
    pub code: usize,
    pub required_len: usize,
    /// Length of the longest common prefix of Δ and the stage's sequence,
    /// capped at the stored Δ length.
    pub agreed_len: usize,
    pub mismatch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact1Report {
    pub checks: Vec<StageCheck>,
}

impl Fact1Report {
    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.mismatch.is_none() && c.agreed_len >= c.required_len)
    }

    /// First stage and position where Δ departs from its stage sequence.
    pub fn first_mismatch(&self) -> Option<(usize, usize)> {
        self.checks.iter().find_map(|c| c.mismatch.map(|pos| (c.stage, pos)))
    }
}

/// Checks bit for bit that Δ agrees with the sequence of code `e_n` on its
/// first `|σ_n| + t_{e_n}` bits, for every stage.
pub fn verify_fact1(r: &DeltaResult) -> Fact1Report {
    let registry = r.registry.as_ref().expect("delta result carries its registry");
    let checks = r
        .stages
        .iter()
        .map(|s| {
            let z = registry.get(s.code).expect("registered code");
            let required = s.agreement_len();
            let upto = required.min(r.bits.len());
            let zb = z.prefix(upto);
            let agreed = r.bits.prefix(upto).common_prefix_len(&zb);
            StageCheck {
                stage: s.stage,
                code: s.code,
                required_len: required,
                agreed_len: agreed,
                mismatch: (agreed < required).then_some(agreed),
            }
        })
        .collect();
    Fact1Report { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::catalog::rules;
    use crate::martingale::{eval, play_bits, Budget, EvalOutcome};

    fn r(n: i64, d: i64) -> Rat {
        Rat::frac(n, d)
    }

    fn half_on(side: bool) -> StrategyProgram {
        StrategyProgram::from_rule(
            if side { "half-on-1" } else { "half-on-0" },
            Rat::one(),
            rules::Fixed {
                side,
                fraction: r(1, 2),
            },
        )
    }

    fn never() -> StrategyProgram {
        StrategyProgram::from_rule("never", Rat::one(), rules::Never)
    }

    #[test]
    fn pick_weight_examples() {
        assert_eq!(pick_weight(&BitString::empty(), &[], &half_on(false)).unwrap(), r(1, 2));
        // S = 1/2 from a never-betting member of weight 1/2; d_new(σ) = 2.
        let fam = vec![(never(), r(1, 2))];
        let two = StrategyProgram::new(crate::martingale::BetStrategy::new(
            "two",
            Rat::int(2),
            std::sync::Arc::new(rules::Never),
        ));
        let q = pick_weight(&bits("0"), &fam, &two).unwrap();
        assert_eq!(q, r(1, 8));
        assert_eq!(converged_sum(&fam, &bits("0")) + &q * Rat::int(2), r(3, 4));
        // d_new diverges before σ: weight (1 − S)/2.
        let div = StrategyProgram::from_rule(
            "div",
            Rat::one(),
            rules::DivergeAt {
                node: BitString::empty(),
                side: false,
                fraction: r(1, 2),
            },
        );
        assert_eq!(pick_weight(&bits("01"), &fam, &div).unwrap(), r(1, 4));
        let full = vec![(never(), Rat::one())];
        assert!(matches!(
            pick_weight(&BitString::empty(), &full, &never()),
            Err(DiagError::Precondition { .. })
        ));
    }

    #[test]
    fn diagonal_against_half_on_zero() {
        let fam = vec![(half_on(false), r(1, 2))];
        let x = diagonalize_finite(&fam, &BitString::empty()).unwrap();
        assert_eq!(x.prefix(7), bits("0100100"));
        let t = play_bits(&fam[0].0, &x.prefix(7), "x", Budget::UNLIMITED);
        let sums: Vec<Rat> = t.values.iter().map(|v| v.value().unwrap() * r(1, 2)).collect();
        assert_eq!(
            sums,
            vec![
                r(1, 2),
                r(3, 4),
                r(3, 8),
                r(9, 16),
                r(27, 32),
                r(27, 64),
                r(81, 128),
                r(243, 256)
            ]
        );
    }

    #[test]
    fn diagonal_against_never_is_zeros() {
        let x = diagonalize_finite(&[(never(), r(3, 4))], &bits("11")).unwrap();
        assert_eq!(x.prefix(6), bits("110000"));
    }

    #[test]
    fn diagonal_drops_member_that_diverges() {
        // a diverges on the node "0"; afterwards only b matters.
        let a = StrategyProgram::from_rule(
            "a",
            Rat::one(),
            rules::DivergeAt {
                node: bits("0"),
                side: true,
                fraction: r(1, 2),
            },
        );
        let b = half_on(true);
        let fam = vec![(a, r(1, 4)), (b.clone(), r(1, 4))];
        let x = diagonalize_finite(&fam, &BitString::empty()).unwrap();
        let p = x.prefix(8);
        // Bit 0 at ε: a("0") = 1/2, b("0") = 1/2, sum 1/4 < 1.
        assert!(!p.bit(0));
        // From "0" on, the sequence is the diagonal against b alone.
        let y = diagonalize_finite(&[(b, r(1, 4))], &bits("0")).unwrap();
        assert_eq!(p, y.prefix(8));
    }

    #[test]
    fn precondition_is_checked() {
        assert!(matches!(
            diagonalize_finite(&[(never(), Rat::one())], &BitString::empty()),
            Err(DiagError::Precondition { .. })
        ));
    }

    #[test]
    fn gap_specs_parse() {
        assert_eq!("const:5".parse::<GapSpec>().unwrap(), GapSpec::Constant(5));
        assert_eq!("linear:2,3".parse::<GapSpec>().unwrap().at(4), 11);
        let t: GapSpec = "table:4,7".parse().unwrap();
        assert_eq!((t.at(0), t.at(1), t.at(9)), (4, 7, 7));
        assert_eq!(t.to_string(), "table:4,7");
        assert!("const:".parse::<GapSpec>().is_err());
        assert!("wat:1".parse::<GapSpec>().is_err());
    }

    #[test]
    fn delta_single_member() {
        let d = build_delta(&GapSpec::Constant(2), &[half_on(false)], 2).unwrap();
        assert_eq!(d.bits.prefix(2), bits("01"));
        assert_eq!(d.stages.len(), 1);
        assert!(verify_fact1(&d).passed());
    }

    #[test]
    fn delta_of_never_betting_catalog() {
        let d = build_delta(&GapSpec::Constant(3), &[never(), never(), never()], 10).unwrap();
        assert_eq!(d.bits.prefix(10), BitString::zeros(10));
        let codes: Vec<usize> = d.stages.iter().map(|s| s.code).collect();
        assert_eq!(codes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn corrupted_delta_reports_mismatch() {
        let mut d = build_delta(&GapSpec::Constant(4), &[half_on(false), half_on(true)], 12).unwrap();
        assert!(verify_fact1(&d).passed());
        let mut raw: Vec<bool> = d.bits.bits().to_vec();
        raw[6] = !raw[6];
        d.bits = BitString::from_bits(raw);
        let rep = verify_fact1(&d);
        assert!(!rep.passed());
        assert_eq!(rep.first_mismatch(), Some((1, 6)));
    }

    #[test]
    fn gap_scales_agreement() {
        let cat = vec![half_on(false), half_on(true)];
        for t in [1, 100] {
            let d = build_delta(&GapSpec::Constant(t), &cat, 200).unwrap();
            let rep = verify_fact1(&d);
            assert!(rep.passed());
            for (i, c) in rep.checks.iter().enumerate() {
                assert_eq!(c.required_len, (i + 1) * t);
            }
        }
    }

    #[test]
    fn delta_defeats_each_member() {
        let cat = vec![half_on(false), half_on(true), never()];
        let d = build_delta(&GapSpec::Constant(5), &cat, 60).unwrap();
        for ((id, q), s) in d.family.iter().zip(&cat) {
            let t = play_bits(s, &d.bits, "delta", Budget::UNLIMITED);
            let bound = q.recip();
            assert!(t.values.iter().all(|v| v.value().unwrap() < &bound), "{id}");
        }
        assert_eq!(
            eval(&cat[0], &BitString::empty(), Budget::UNLIMITED),
            EvalOutcome::Converged { value: Rat::one() }
        );
    }

    #[test]
    fn builder_is_deterministic() {
        let cat = vec![half_on(false), half_on(true)];
        let a = build_delta(&GapSpec::Linear { a: 1, b: 2 }, &cat, 40).unwrap();
        let b = build_delta(&GapSpec::Linear { a: 1, b: 2 }, &cat, 40).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.stages, b.stages);
    }
}

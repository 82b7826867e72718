//! Capital transforms: scaling, mixtures, savings, time-bound totalization,
//! the delayed mixture of oracle strategies, and exact oracle averages.

use thiserror::Error;

use crate::bits::BitString;
use crate::bound::TimeBound;
use crate::martingale::{eval, Budget, EvalOutcome, Expansion, Strategy, StrategyProgram, Walker};
use crate::oracle::{OracleBetStrategy, OracleProgram, OracleStrategy};
use crate::rat::Rat;

/// Largest oracle-use bound for which averages are computed.
pub const MAX_AVERAGE_USE: u64 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("mixture needs at least one member")]
    EmptyMixture,
    #[error("weight {0} must be positive")]
    Weight(Rat),
    #[error("{0} declares no oracle-use bound")]
    NoUseBound(String),
    #[error("oracle use {use_len} exceeds the limit {MAX_AVERAGE_USE}")]
    UseBoundTooLarge { use_len: u64 },
    #[error("{id} is not total under oracle {oracle} at {sigma}")]
    NotTotal {
        id: String,
        oracle: BitString,
        sigma: BitString,
    },
    #[error("member {index} bets on {sigma} before its delay")]
    Delay { index: usize, sigma: BitString },
}

fn expand_scaled(e: Expansion, q: &Rat) -> Expansion {
    match e {
        Expansion::Split { zero, one, steps } => Expansion::Split {
            zero: zero * q,
            one: one * q,
            steps,
        },
        d => d,
    }
}

#[derive(Debug)]
struct Scaled {
    inner: StrategyProgram,
    q: Rat,
}

impl Strategy for Scaled {
    fn id(&self) -> String {
        format!("{}*{}", self.q, self.inner.id())
    }

    fn initial_capital(&self) -> Rat {
        self.inner.initial_capital() * &self.q
    }

    fn walker(&self) -> Box<dyn Walker> {
        let inner = self.inner.walker();
        let capital = inner.capital() * &self.q;
        Box::new(ScaledWalker {
            inner,
            q: self.q.clone(),
            capital,
        })
    }
}

struct ScaledWalker {
    inner: Box<dyn Walker>,
    q: Rat,
    capital: Rat,
}

impl Walker for ScaledWalker {
    fn position(&self) -> &BitString {
        self.inner.position()
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        expand_scaled(self.inner.expand(), &self.q)
    }

    fn descend(&mut self, bit: bool) {
        self.inner.descend(bit);
        self.capital = self.inner.capital() * &self.q;
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(ScaledWalker {
            inner: self.inner.fork(),
            q: self.q.clone(),
            capital: self.capital.clone(),
        })
    }
}

/// `q·d`, with the same domain as `d`.
pub fn scale(d: &StrategyProgram, q: &Rat) -> Result<StrategyProgram, TransformError> {
    if !q.is_positive() {
        return Err(TransformError::Weight(q.clone()));
    }
    Ok(StrategyProgram::new(Scaled {
        inner: d.clone(),
        q: q.clone(),
    }))
}

#[derive(Debug)]
struct Mixture {
    members: Vec<(StrategyProgram, Rat)>,
}

impl Strategy for Mixture {
    fn id(&self) -> String {
        let parts: Vec<String> = self.members.iter().map(|(d, q)| format!("{}*{}", q, d.id())).collect();
        format!("mix({})", parts.join("+"))
    }

    fn initial_capital(&self) -> Rat {
        self.members.iter().map(|(d, q)| d.initial_capital() * q).sum()
    }

    fn walker(&self) -> Box<dyn Walker> {
        Box::new(MixtureWalker {
            members: self.members.iter().map(|(d, q)| (d.walker(), q.clone())).collect(),
            position: BitString::empty(),
            capital: self.initial_capital(),
        })
    }
}

struct MixtureWalker {
    members: Vec<(Box<dyn Walker>, Rat)>,
    position: BitString,
    capital: Rat,
}

impl Walker for MixtureWalker {
    fn position(&self) -> &BitString {
        &self.position
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        let mut zero = Rat::zero();
        let mut one = Rat::zero();
        let mut steps = 0u64;
        for (w, q) in &mut self.members {
            let e = w.expand();
            steps = steps.saturating_add(e.steps());
            if let Expansion::Split { zero: z, one: o, .. } = e {
                zero = zero + z * &*q;
                one = one + o * &*q;
            }
        }
        Expansion::Split { zero, one, steps }
    }

    fn descend(&mut self, bit: bool) {
        let mut capital = Rat::zero();
        self.members.retain_mut(|(w, q)| match w.expand() {
            Expansion::Split { .. } => {
                w.descend(bit);
                capital = &capital + w.capital() * &*q;
                true
            }
            Expansion::Diverge { .. } => false,
        });
        self.capital = capital;
        self.position.push(bit);
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(MixtureWalker {
            members: self.members.iter().map(|(w, q)| (w.fork(), q.clone())).collect(),
            position: self.position.clone(),
            capital: self.capital.clone(),
        })
    }
}

/// `Σ q_i·d_i` over the members still defined at each string.
///
/// A member is dropped below the first node where it diverges, so the
/// mixture is defined everywhere. At such a node the mixture loses that
/// member's capital and is only a supermartingale there.
pub fn mixture(family: &[(StrategyProgram, Rat)]) -> Result<StrategyProgram, TransformError> {
    if family.is_empty() {
        return Err(TransformError::EmptyMixture);
    }
    if let Some((_, q)) = family.iter().find(|(_, q)| !q.is_positive()) {
        return Err(TransformError::Weight(q.clone()));
    }
    Ok(StrategyProgram::new(Mixture {
        members: family.to_vec(),
    }))
}

#[derive(Debug)]
struct Savings {
    inner: StrategyProgram,
}

impl Strategy for Savings {
    fn id(&self) -> String {
        format!("savings({})", self.inner.id())
    }

    fn initial_capital(&self) -> Rat {
        self.inner.initial_capital()
    }

    fn walker(&self) -> Box<dyn Walker> {
        let inner = self.inner.walker();
        let c0 = inner.capital().clone();
        Box::new(SavingsWalker {
            inner,
            threshold: &c0 * Rat::int(2),
            capital: c0,
            savings: Rat::zero(),
            scale: Rat::one(),
        })
    }
}

/// Output capital is `savings + scale·d`, where `scale` halves at every
/// banking event.
struct SavingsWalker {
    inner: Box<dyn Walker>,
    threshold: Rat,
    capital: Rat,
    savings: Rat,
    scale: Rat,
}

impl SavingsWalker {
    fn output(&self, d: &Rat) -> Rat {
        &self.savings + d * &self.scale
    }
}

impl Walker for SavingsWalker {
    fn position(&self) -> &BitString {
        self.inner.position()
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        match self.inner.expand() {
            Expansion::Split { zero, one, steps } => Expansion::Split {
                zero: self.output(&zero),
                one: self.output(&one),
                steps,
            },
            d => d,
        }
    }

    fn descend(&mut self, bit: bool) {
        self.inner.descend(bit);
        let active = self.inner.capital() * &self.scale;
        if active >= self.threshold {
            let half = active / Rat::int(2);
            self.savings = &self.savings + &half;
            self.scale = &self.scale / Rat::int(2);
        }
        self.capital = self.output(&self.inner.capital().clone());
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(SavingsWalker {
            inner: self.inner.fork(),
            threshold: self.threshold.clone(),
            capital: self.capital.clone(),
            savings: self.savings.clone(),
            scale: self.scale.clone(),
        })
    }
}

/// Savings-account version of `d`: whenever the active part reaches twice
/// the initial capital, half of it is banked and never wagered again.
pub fn savings_transform(d: &StrategyProgram) -> StrategyProgram {
    StrategyProgram::new(Savings { inner: d.clone() })
}

/// Banked and active parts along a play of the savings transform.
pub fn savings_split(d: &StrategyProgram, bits: &BitString) -> Option<(Rat, Rat)> {
    let inner = d.walker();
    let c0 = inner.capital().clone();
    let mut w = SavingsWalker {
        inner,
        threshold: &c0 * Rat::int(2),
        capital: c0,
        savings: Rat::zero(),
        scale: Rat::one(),
    };
    for b in bits.iter() {
        if let Expansion::Diverge { .. } = w.expand() {
            return None;
        }
        w.descend(b);
    }
    let active = &w.capital - &w.savings;
    Some((w.savings, active))
}

#[derive(Debug)]
struct Totalized {
    inner: StrategyProgram,
    psi: TimeBound,
}

impl Strategy for Totalized {
    fn id(&self) -> String {
        format!("{}^psi", self.inner.id())
    }

    fn initial_capital(&self) -> Rat {
        self.inner.initial_capital()
    }

    fn walker(&self) -> Box<dyn Walker> {
        let inner = self.inner.walker();
        let capital = inner.capital().clone();
        Box::new(TotalizedWalker {
            inner: Some(inner),
            psi: self.psi.clone(),
            position: BitString::empty(),
            capital,
        })
    }
}

struct TotalizedWalker {
    /// `None` once the underlying computation has diverged on this path.
    inner: Option<Box<dyn Walker>>,
    psi: TimeBound,
    position: BitString,
    capital: Rat,
}

impl TotalizedWalker {
    fn children(&mut self) -> (Rat, Rat) {
        let limit = self.psi.at(self.position.len() + 1);
        let frozen = (self.capital.clone(), self.capital.clone());
        let Some(w) = self.inner.as_mut() else {
            return frozen;
        };
        match w.expand() {
            Expansion::Split { zero, one, steps } if steps <= limit => {
                let d = w.capital();
                (&self.capital * &zero / d, &self.capital * &one / d)
            }
            _ => frozen,
        }
    }
}

impl Walker for TotalizedWalker {
    fn position(&self) -> &BitString {
        &self.position
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        let (zero, one) = self.children();
        Expansion::Split { zero, one, steps: 1 }
    }

    fn descend(&mut self, bit: bool) {
        let (zero, one) = self.children();
        if let Some(w) = self.inner.as_mut() {
            match w.expand() {
                Expansion::Split { .. } => w.descend(bit),
                Expansion::Diverge { .. } => self.inner = None,
            }
        }
        self.capital = if bit { one } else { zero };
        self.position.push(bit);
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(TotalizedWalker {
            inner: self.inner.as_ref().map(|w| w.fork()),
            psi: self.psi.clone(),
            position: self.position.clone(),
            capital: self.capital.clone(),
        })
    }
}

/// `d^ψ`: follows the ratios of `d` at every node whose bet is decided within
/// `ψ(|σ|+1)` steps and places no bet elsewhere. Total and fair.
pub fn time_bound_totalize(d: &StrategyProgram, psi: &TimeBound) -> StrategyProgram {
    StrategyProgram::new(Totalized {
        inner: d.clone(),
        psi: psi.clone(),
    })
}

#[derive(Debug)]
struct TotalizedOracle {
    inner: OracleProgram,
    psi: TimeBound,
}

impl OracleStrategy for TotalizedOracle {
    fn id(&self) -> String {
        format!("{}^psi", self.inner.id())
    }

    fn use_bound(&self) -> Option<TimeBound> {
        self.inner.use_bound()
    }

    fn relativize(&self, oracle: &BitString) -> StrategyProgram {
        time_bound_totalize(&self.inner.relativize(oracle), &self.psi)
    }
}

/// `d^{Y,ψ}` for every oracle Y.
pub fn time_bound_totalize_oracle(d: &OracleProgram, psi: &TimeBound) -> OracleProgram {
    OracleProgram::new(TotalizedOracle {
        inner: d.clone(),
        psi: psi.clone(),
    })
}

/// Oracle strategies `d_1, d_2, …` where `d_i` places no bet on strings
/// shorter than `i`.
#[derive(Debug, Clone)]
pub struct DelayedCatalog {
    members: Vec<OracleBetStrategy>,
}

impl DelayedCatalog {
    /// Imposes delay `i` on the `i`-th member (1-based).
    pub fn new(members: &[OracleBetStrategy]) -> Self {
        DelayedCatalog {
            members: members.iter().enumerate().map(|(i, d)| d.delayed(i + 1)).collect(),
        }
    }

    pub fn members(&self) -> &[OracleBetStrategy] {
        &self.members
    }

    /// Checks, under each given oracle, that member `i` keeps both children
    /// equal on every string shorter than `i`.
    pub fn verify_delays(&self, oracles: &[BitString]) -> Result<(), TransformError> {
        for (idx, d) in self.members.iter().enumerate() {
            let delay = (idx + 1).min(12);
            for w in oracles {
                let s = d.relativize(w);
                for len in 0..delay {
                    for sigma in BitString::all_of_length(len) {
                        let (z, o) = (
                            eval(&s, &sigma.child(false), Budget::UNLIMITED),
                            eval(&s, &sigma.child(true), Budget::UNLIMITED),
                        );
                        if z != o {
                            return Err(TransformError::Delay { index: idx + 1, sigma });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct DelayedMixture {
    members: Vec<OracleBetStrategy>,
    f: TimeBound,
}

impl OracleStrategy for DelayedMixture {
    fn id(&self) -> String {
        format!("hat({})", self.members.len())
    }

    fn use_bound(&self) -> Option<TimeBound> {
        let bounds: Option<Vec<TimeBound>> = self.members.iter().map(|d| d.use_bound()).collect();
        bounds.map(TimeBound::Max)
    }

    fn relativize(&self, oracle: &BitString) -> StrategyProgram {
        let family: Vec<(StrategyProgram, Rat)> = self
            .members
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (
                    time_bound_totalize(&d.relativize(oracle), &self.f),
                    Rat::pow2(-(i as i64 + 1)),
                )
            })
            .collect();
        mixture(&family).expect("nonempty family with positive weights")
    }
}

/// `d̂^Z(σ) = Σ_i 2^{-i}·d_i^{Z,F}(σ)`.
pub fn delayed_mixture_hat(catalog: &DelayedCatalog, f: &TimeBound) -> Result<OracleProgram, TransformError> {
    if catalog.members.is_empty() {
        return Err(TransformError::EmptyMixture);
    }
    Ok(OracleProgram::new(DelayedMixture {
        members: catalog.members.clone(),
        f: f.clone(),
    }))
}

/// Values `d^w(σ)` for every oracle prefix `w` of length `u(|σ|)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleProfile {
    pub sigma: BitString,
    pub use_len: usize,
    pub values: Vec<Rat>,
}

impl OracleProfile {
    /// The exact uniform average `D(σ)`.
    pub fn average(&self) -> Rat {
        let total: Rat = self.values.iter().sum();
        total * Rat::pow2(-(self.use_len as i64))
    }

    /// Fraction of oracle prefixes with `d^w(σ) ≥ k`.
    pub fn fraction_at_least(&self, k: &Rat) -> Rat {
        let hits = self.values.iter().filter(|v| *v >= k).count();
        Rat::int(hits as i64) * Rat::pow2(-(self.use_len as i64))
    }

    /// `fraction_at_least(k) ≤ D(σ)/k`.
    pub fn markov_holds(&self, k: &Rat) -> bool {
        assert!(k.is_positive(), "Markov threshold must be positive");
        self.fraction_at_least(k) * k <= self.average()
    }
}

pub fn oracle_profile(d: &OracleProgram, sigma: &BitString) -> Result<OracleProfile, TransformError> {
    let u = d.use_bound().ok_or_else(|| TransformError::NoUseBound(d.id()))?;
    let use_len = u.at(sigma.len());
    if use_len > MAX_AVERAGE_USE {
        return Err(TransformError::UseBoundTooLarge { use_len });
    }
    let use_len = use_len as usize;
    let values = BitString::all_of_length(use_len)
        .map(|w| match eval(&d.relativize(&w), sigma, Budget::UNLIMITED) {
            EvalOutcome::Converged { value } => Ok(value),
            _ => Err(TransformError::NotTotal {
                id: d.id(),
                oracle: w,
                sigma: sigma.clone(),
            }),
        })
        .collect::<Result<_, _>>()?;
    Ok(OracleProfile {
        sigma: sigma.clone(),
        use_len,
        values,
    })
}

/// `D(σ) = 2^{-u(|σ|)}·Σ_w d^w(σ)`, exactly.
pub fn average_over_oracles(d: &OracleProgram, sigma: &BitString) -> Result<Rat, TransformError> {
    oracle_profile(d, sigma).map(|p| p.average())
}

/// Wraps `D = ∫ d^Y` as an ordinary strategy; panics where the average is
/// not computable.
pub fn averaged(d: &OracleProgram) -> StrategyProgram {
    StrategyProgram::new(Averaged { inner: d.clone() })
}

#[derive(Debug)]
struct Averaged {
    inner: OracleProgram,
}

impl Strategy for Averaged {
    fn id(&self) -> String {
        format!("avg({})", self.inner.id())
    }

    fn initial_capital(&self) -> Rat {
        average_over_oracles(&self.inner, &BitString::empty()).expect("computable average")
    }

    fn walker(&self) -> Box<dyn Walker> {
        Box::new(AveragedWalker {
            inner: self.inner.clone(),
            capital: self.initial_capital(),
            position: BitString::empty(),
        })
    }
}

#[derive(Clone)]
struct AveragedWalker {
    inner: OracleProgram,
    position: BitString,
    capital: Rat,
}

impl Walker for AveragedWalker {
    fn position(&self) -> &BitString {
        &self.position
    }

    fn capital(&self) -> &Rat {
        &self.capital
    }

    fn expand(&mut self) -> Expansion {
        let avg = |b| average_over_oracles(&self.inner, &self.position.child(b)).expect("computable average");
        Expansion::Split {
            zero: avg(false),
            one: avg(true),
            steps: 1,
        }
    }

    fn descend(&mut self, bit: bool) {
        self.position.push(bit);
        self.capital = average_over_oracles(&self.inner, &self.position).expect("computable average");
    }

    fn fork(&self) -> Box<dyn Walker> {
        Box::new(self.clone())
    }
}

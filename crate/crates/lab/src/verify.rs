//! Invariant suites run by `gamblers verify` and the acceptance tests.

use std::cmp::Ordering;
use std::collections::HashMap;

use gamblers_core::bound::TimeBound;
use gamblers_core::catalog::{costly_strategies, Catalog, StrategySpec};
use gamblers_core::diagonalization::{build_delta, diagonalize_finite, verify_fact1, GapSpec};
use gamblers_core::finite::FiniteMartingale;
use gamblers_core::fireworks::{
    dense_capital_set, fireworks_run, generic_martingale, length_dense_set, Adversary, DenseCapitalSet, Enumerator,
    FireworksParams, MartingaleOrder,
};
use gamblers_core::martingale::{assess_success, eval, play, play_bits, Budget, EvalOutcome, Expansion, Success};
use gamblers_core::oracle::OracleProgram;
use gamblers_core::rat::weighted_sum_cmp;
use gamblers_core::sequence::{self, rng};
use gamblers_core::transforms::{
    delayed_mixture_hat, mixture, savings_transform, scale, time_bound_totalize, DelayedCatalog,
};
use gamblers_core::{BitString, Rat, StrategyProgram};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?}; known: {known}", known = SUITES.join(", "))]
    UnknownSuite(String),
}

pub const SUITES: [&str; 7] = [
    "fairness",
    "boundedness",
    "fact1",
    "totalization",
    "markov",
    "adversary",
    "honest",
];

/// Module names that select several suites.
pub const GROUPS: [(&str, &[&str]); 4] = [
    ("core", &["fairness"]),
    ("transforms", &["totalization", "markov"]),
    ("diagonalization", &["boundedness", "fact1"]),
    ("fireworks", &["adversary", "honest"]),
];

/// Expands group names; suite names pass through unchanged.
pub fn expand_selection(names: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let members = GROUPS
            .iter()
            .find(|(g, _)| g == n)
            .map_or_else(|| vec![n.clone()], |(_, m)| m.iter().map(|s| s.to_string()).collect());
        for m in members {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Scale {
    #[default]
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: u64,
    pub failures: u64,
    pub detail: String,
}

impl SuiteReport {
    fn new(suite: &str, checks: u64, failures: u64, detail: String) -> Self {
        SuiteReport {
            suite: suite.into(),
            passed: failures == 0,
            checks,
            failures,
            detail,
        }
    }
}

pub fn run_suite(name: &str, catalog: &Catalog, scale: Scale, seed: u64) -> Result<SuiteReport, VerifyError> {
    let full = scale == Scale::Full;
    let pick = |quick: usize, spec: usize| if full { spec } else { quick };
    Ok(match name {
        "fairness" => fairness_suite(&fairness_pool(catalog), pick(2_000, 10_000), 40, seed),
        "boundedness" => boundedness_suite(&catalog.strategies, pick(10, 100), pick(500, 5_000), seed),
        "fact1" => fact1_suite(&catalog.strategies, pick(500, 2_000), &GapSpec::Linear { a: 4, b: 8 }),
        "totalization" => totalization_suite(&catalog.strategies, pick(8, 10), 10, pick(4, 6), pick(20, 100), seed),
        "markov" => markov_suite(&oracle_pool(catalog, pick(8, 11)), pick(200, 1_000), seed),
        "adversary" => adversary_suite(8, pick(400, 2_000), 3, seed),
        "honest" => honest_suite(64, pick(50, 500), seed),
        other => return Err(VerifyError::UnknownSuite(other.to_string())),
    })
}

fn build_specs(specs: Vec<StrategySpec>) -> Vec<StrategyProgram> {
    specs
        .iter()
        .map(|s| s.build().expect("built-in specs are valid"))
        .collect()
}

/// Catalog strategies, the costly ones and transforms of both.
pub fn fairness_pool(catalog: &Catalog) -> Vec<StrategyProgram> {
    let mut pool = catalog.strategies.clone();
    pool.extend(build_specs(costly_strategies()));
    let base = pool.clone();
    let psi = TimeBound::Constant(3);
    for d in &base {
        pool.push(savings_transform(d));
        pool.push(time_bound_totalize(d, &psi));
        pool.push(scale(d, &Rat::frac(1, 3)).expect("positive factor"));
    }
    let partial = catalog.partial_ids();
    let total: Vec<(StrategyProgram, Rat)> = catalog
        .strategies
        .iter()
        .filter(|d| !partial.contains(&d.id()))
        .map(|d| (d.clone(), Rat::frac(1, 8)))
        .collect();
    if !total.is_empty() {
        pool.push(mixture(&total).expect("nonempty family"));
    }
    pool
}

fn random_bits(r: &mut impl Rng, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| r.random_bool(0.5)))
}

/// `2·d(σ) = d(σ0) + d(σ1)` wherever the children converge, and both or
/// neither child converges below a converged node.
pub fn fairness_suite(pool: &[StrategyProgram], pairs: usize, max_len: usize, seed: u64) -> SuiteReport {
    let mut r = rng(seed);
    let mut failures = 0;
    let mut checked = 0;
    let mut first = String::new();
    for _ in 0..pairs {
        let d = pool.choose(&mut r).expect("nonempty pool");
        let len = r.random_range(0..=max_len);
        let sigma = random_bits(&mut r, len);
        let v = |s: &BitString| eval(d, s, Budget::UNLIMITED);
        let (parent, c0, c1) = (v(&sigma), v(&sigma.child(false)), v(&sigma.child(true)));
        let ok = match (parent.value(), c0.value(), c1.value()) {
            (Some(p), Some(a), Some(b)) => {
                checked += 1;
                Rat::int(2) * p == a + b
            }
            (Some(_), None, None) => true,
            (Some(_), _, _) => false,
            (None, _, _) => true,
        };
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!(" first failure: {} at {}", d.id(), sigma);
            }
        }
    }
    SuiteReport::new(
        "fairness",
        pairs as u64,
        failures,
        format!("{checked} fully converged pairs out of {pairs}.{first}"),
    )
}

/// Random weights `a_i / (Σa + extra)` over a random nonempty subfamily.
pub fn random_family(strategies: &[StrategyProgram], r: &mut impl Rng) -> Vec<(StrategyProgram, Rat)> {
    let mut chosen: Vec<StrategyProgram> = strategies.iter().filter(|_| r.random_bool(0.6)).cloned().collect();
    if chosen.is_empty() {
        chosen.push(strategies.choose(r).expect("nonempty catalog").clone());
    }
    let weights: Vec<i64> = chosen.iter().map(|_| r.random_range(1..=16)).collect();
    let total: i64 = weights.iter().sum::<i64>() + r.random_range(1..=16);
    chosen
        .into_iter()
        .zip(weights)
        .map(|(d, a)| (d, Rat::frac(a, total)))
        .collect()
}

/// Replays the diagonal sequence with fresh walkers and checks the converged
/// weighted sum stays below 1 and every member below `1/q_i`.
pub fn boundedness_suite(strategies: &[StrategyProgram], families: usize, depth: usize, seed: u64) -> SuiteReport {
    let mut r = rng(seed);
    let mut failures = 0;
    let mut first = String::new();
    let one = Rat::one();
    for f in 0..families {
        let family = random_family(strategies, &mut r);
        let z = diagonalize_finite(&family, &BitString::empty()).expect("weights sum below 1");
        let bits = z.prefix(depth);
        let mut walkers: Vec<_> = family.iter().map(|(d, q)| (Some(d.walker()), q.clone())).collect();
        for l in 0..=depth {
            let live: Vec<(Rat, Rat)> = walkers
                .iter()
                .filter_map(|(w, q)| w.as_ref().map(|w| (w.capital().clone(), q.clone())))
                .collect();
            let sum_ok = weighted_sum_cmp(live.iter().map(|(c, q)| (c, q)), &one) == Ordering::Less;
            let each_ok = live
                .iter()
                .all(|(c, q)| weighted_sum_cmp([(c, q)], &one) != Ordering::Greater);
            if !(sum_ok && each_ok) {
                failures += 1;
                if first.is_empty() {
                    first = format!(" first failure: family {f} at length {l}");
                }
                break;
            }
            if l == depth {
                break;
            }
            let bit = bits.bit(l);
            for (w, _) in walkers.iter_mut() {
                if let Some(walker) = w {
                    match walker.expand() {
                        Expansion::Split { .. } => walker.descend(bit),
                        Expansion::Diverge { .. } => *w = None,
                    }
                }
            }
        }
    }
    SuiteReport::new(
        "boundedness",
        families as u64,
        failures,
        format!("{families} families to depth {depth}.{first}"),
    )
}

/// Builds Δ, checks stage agreement and that every strategy stays below `1/q_i`.
pub fn fact1_suite(strategies: &[StrategyProgram], depth: usize, gap: &GapSpec) -> SuiteReport {
    let delta = match build_delta(gap, strategies, depth) {
        Ok(d) => d,
        Err(e) => return SuiteReport::new("fact1", 1, 1, format!("construction failed: {e}")),
    };
    let report = verify_fact1(&delta);
    let mut failures = report.checks.iter().filter(|c| c.mismatch.is_some()).count() as u64;
    let mut diverged = 0;
    for (id, q) in &delta.family {
        let d = strategies.iter().find(|d| &d.id() == id).expect("family from catalog");
        let t = play_bits(d, &delta.bits, "delta", Budget::UNLIMITED);
        if t.first_divergence().is_some() {
            diverged += 1;
        }
        if t.max_converged().is_some_and(|m| m > &q.recip()) {
            failures += 1;
        }
    }
    SuiteReport::new(
        "fact1",
        (report.checks.len() + delta.family.len()) as u64,
        failures,
        format!(
            "|Δ| = {}, {} stages, {} strategies ({} diverged on Δ)",
            delta.bits.len(),
            delta.stages.len(),
            delta.family.len(),
            diverged
        ),
    )
}

/// Exact checks of `d^ψ`: equality under a dominating ψ, totality under
/// ψ ≡ 0 and a constant ratio once ψ dominates from length `n`.
pub fn totalization_suite(
    catalog: &[StrategyProgram],
    exhaustive_len: usize,
    n: usize,
    extra: usize,
    samples: usize,
    seed: u64,
) -> SuiteReport {
    let costly = build_specs(costly_strategies());
    let mut checks = 0u64;
    let mut failures = 0u64;
    let mut first = String::new();
    let mut fail = |what: String, failures: &mut u64| {
        *failures += 1;
        if first.is_empty() {
            first = format!(" first failure: {what}");
        }
    };
    let strings: Vec<BitString> = (0..=exhaustive_len).flat_map(BitString::all_of_length).collect();

    let dominating = TimeBound::Max(vec![TimeBound::Constant(1000), TimeBound::Affine { a: 1, b: 1 }]);
    for d in &costly {
        let t = time_bound_totalize(d, &dominating);
        for s in &strings {
            checks += 1;
            if eval(&t, s, Budget::UNLIMITED) != eval(d, s, Budget::UNLIMITED) {
                fail(
                    format!("{} differs from its totalization at {s}", d.id()),
                    &mut failures,
                );
            }
        }
    }

    let zero = TimeBound::Constant(0);
    for d in costly.iter().chain(catalog) {
        let t = time_bound_totalize(d, &zero);
        for s in &strings {
            checks += 1;
            if eval(&t, s, Budget::UNLIMITED)
                != (EvalOutcome::Converged {
                    value: d.initial_capital(),
                })
            {
                fail(format!("{} with ψ ≡ 0 is not total at {s}", d.id()), &mut failures);
            }
        }
    }

    let late = TimeBound::table(vec![(0, 0), (n + 1, 1000)]).expect("nondecreasing");
    let mut r = rng(seed);
    for d in &costly {
        let t = time_bound_totalize(d, &late);
        for _ in 0..samples {
            let tau = random_bits(&mut r, n);
            let (Some(dt), Some(tt)) = (
                eval(d, &tau, Budget::UNLIMITED).value().cloned(),
                eval(&t, &tau, Budget::UNLIMITED).value().cloned(),
            ) else {
                fail(format!("{} undefined at {tau}", d.id()), &mut failures);
                continue;
            };
            for len in 0..=extra {
                for ext in BitString::all_of_length(len) {
                    let s = tau.concat(&ext);
                    checks += 1;
                    let mut w = d.walker();
                    for b in s.iter() {
                        w.expand();
                        w.descend(b);
                    }
                    if w.expand().steps() > late.at(s.len() + 1) {
                        fail(format!("ψ does not dominate {} at {s}", d.id()), &mut failures);
                    }
                    match (
                        eval(d, &s, Budget::UNLIMITED).value(),
                        eval(&t, &s, Budget::UNLIMITED).value(),
                    ) {
                        (Some(a), Some(b)) if b * &dt == a * &tt => {}
                        _ => fail(format!("ratio of {} changes at {s}", d.id()), &mut failures),
                    }
                }
            }
        }
    }
    SuiteReport::new(
        "totalization",
        checks,
        failures,
        format!(
            "{} costly strategies, exhaustive to length {exhaustive_len}, ratio from length {n}.{first}",
            costly.len()
        ),
    )
}

/// The catalog's oracle strategies and their delayed mixture, each with the
/// longest string to average at. The mixture is capped at 8.
pub fn oracle_pool(catalog: &Catalog, max_len: usize) -> Vec<(OracleProgram, usize)> {
    let mut pool: Vec<(OracleProgram, usize)> = catalog
        .oracle_strategies
        .iter()
        .map(|d| (d.program(), max_len))
        .collect();
    if !catalog.oracle_strategies.is_empty() {
        let hat = delayed_mixture_hat(
            &DelayedCatalog::new(&catalog.oracle_strategies),
            &TimeBound::Affine { a: 4, b: 4 },
        )
        .expect("catalog oracle strategies declare use bounds");
        pool.push((hat, max_len.min(8)));
    }
    pool
}

fn oracle_values(d: &OracleProgram, sigma: &BitString) -> Option<Vec<Rat>> {
    let u = usize::try_from(d.use_bound()?.at(sigma.len())).ok()?;
    BitString::all_of_length(u)
        .map(|w| eval(&d.relativize(&w), sigma, Budget::UNLIMITED).value().cloned())
        .collect()
}

/// Average and per-oracle values at one string.
type Profile = (Rat, Vec<Rat>);

/// Exhaustive averaging over oracle prefixes: the average is fair and the
/// Markov bound holds.
pub fn markov_suite(pool: &[(OracleProgram, usize)], pairs: usize, seed: u64) -> SuiteReport {
    let mut r = rng(seed);
    let mut cache: HashMap<(usize, BitString), Option<Profile>> = HashMap::new();
    let mut profile = |i: usize, s: &BitString| {
        cache
            .entry((i, s.clone()))
            .or_insert_with(|| {
                oracle_values(&pool[i].0, s).map(|vs| {
                    let avg = vs.iter().cloned().sum::<Rat>() / Rat::int(vs.len() as i64);
                    (avg, vs)
                })
            })
            .clone()
    };
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..pairs {
        let i = r.random_range(0..pool.len());
        let len = r.random_range(0..=pool[i].1);
        let sigma = random_bits(&mut r, len);
        let k = Rat::frac(r.random_range(1..=32), r.random_range(1..=8));
        let ok = match (
            profile(i, &sigma),
            profile(i, &sigma.child(false)),
            profile(i, &sigma.child(true)),
        ) {
            (Some((avg, vs)), Some((a0, _)), Some((a1, _))) => {
                let count = vs.iter().filter(|v| *v >= &k).count() as i64;
                let sum: Rat = vs.iter().cloned().sum();
                Rat::int(2) * &avg == a0 + a1 && Rat::int(count) * &k <= sum
            }
            _ => false,
        };
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!(" first failure: {} at {sigma}, k = {k}", pool[i].0.id());
            }
        }
    }
    SuiteReport::new(
        "markov",
        pairs as u64,
        failures,
        format!("{} oracle strategies.{first}", pool.len()),
    )
}

/// Single requirement against an adversary whose `guess`-th offer leaves
/// the chain; it must fail exactly when the counter equals the guess.
pub fn adversary_suite(n: u64, seeds: usize, guess: usize, seed: u64) -> SuiteReport {
    let adv = Adversary {
        order: MartingaleOrder,
        guess,
    };
    let params = FireworksParams {
        thresholds: vec![n],
        rounds: n as usize + 4,
        budget_growth: 16,
    };
    let mut fails = 0u64;
    let mut mismatches = 0u64;
    for i in 0..seeds {
        let s = sequence::derive_seed(seed, "adversary", i as u64);
        let run = fireworks_run(&MartingaleOrder, &[&adv], &params, s).expect("valid parameters");
        let failed = !run.statuses[0].is_met();
        if failed {
            fails += 1;
        }
        if failed != (run.counters[0] == guess as u64) {
            mismatches += 1;
        }
    }
    let freq = fails as f64 / seeds as f64;
    let p = 1.0 / n as f64;
    let tol = 3.0 * (p * (1.0 - p) / seeds as f64).sqrt();
    let within = (freq - p).abs() <= tol;
    SuiteReport::new(
        "adversary",
        seeds as u64,
        mismatches + u64::from(!within),
        format!(
            "failure frequency {freq:.4}, expected {p:.4} ± {tol:.4}; {mismatches} runs failed other than at the guess"
        ),
    )
}

/// Requirements used by the honest suite: capital targets on the built-in
/// sequences plus totality up to `rounds`.
pub fn honest_requirements(rounds: usize) -> (Vec<DenseCapitalSet>, Vec<u64>) {
    let caps = vec![
        dense_capital_set(sequence::constant(false), Rat::int(3)),
        dense_capital_set(sequence::constant(true), Rat::int(2)),
        dense_capital_set(sequence::alternating(), Rat::int(4)),
        dense_capital_set(sequence::thue_morse(), Rat::int(3)),
        dense_capital_set(sequence::counting(), Rat::frac(5, 2)),
    ];
    let thresholds = vec![8, 16, 32, 64, rounds as u64];
    (caps, thresholds)
}

/// Honest dense enumerators with `N_e ≤ R`: everything is met, the generic
/// martingale is fair, long enough and wins on each sequence.
pub fn honest_suite(rounds: usize, runs: usize, seed: u64) -> SuiteReport {
    let (caps, mut thresholds) = honest_requirements(rounds);
    let length = length_dense_set(MartingaleOrder, rounds);
    let mut reqs: Vec<&dyn Enumerator<FiniteMartingale>> = caps.iter().map(|w| w as &dyn Enumerator<_>).collect();
    reqs.push(&length);
    thresholds.push(rounds as u64);
    let params = FireworksParams {
        thresholds,
        rounds,
        budget_growth: 64,
    };
    let mut failures = 0u64;
    let mut first = String::new();
    for i in 0..runs {
        let s = sequence::derive_seed(seed, "honest", i as u64);
        let run = fireworks_run(&MartingaleOrder, &reqs, &params, s).expect("valid parameters");
        let fin = run.final_condition();
        let g = generic_martingale(&run);
        let wins = caps.iter().all(|w| {
            let t = play(&g, &w.z, fin.length(), Budget::UNLIMITED);
            matches!(assess_success(&t, &w.k), Success::ReachedAt { .. })
        });
        let ok = run.all_met() && fin.check_fairness().is_ok() && fin.length() >= rounds && wins;
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!(" first failure: seed {s}");
            }
        }
    }
    SuiteReport::new(
        "honest",
        runs as u64,
        failures,
        format!("{} requirements, R = {rounds}.{first}", reqs.len()),
    )
}

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gamblers_core::catalog::default_catalog;
use gamblers_core::diagonalization::{build_delta, verify_fact1, GapSpec};
use gamblers_core::fireworks::{fireworks_run, Adversary, FireworksParams, MartingaleOrder};
use gamblers_core::martingale::{play_bits, Budget, EvalOutcome};
use gamblers_core::sequence::derive_seed;
use gamblers_core::Rat;
use gamblers_lab::config::SeparationConfig;
use gamblers_lab::output::{render, Format};
use gamblers_lab::separation::separation_experiment;
use gamblers_lab::verify::{
    adversary_suite, boundedness_suite, fairness_pool, fairness_suite, honest_suite, markov_suite, oracle_pool,
    totalization_suite, SuiteReport,
};

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

fn from_suite(r: SuiteReport, min_checks: u64) -> Verdict {
    Verdict {
        passed: r.passed && r.checks >= min_checks,
        detail: format!("{} checks, {} failures; {}", r.checks, r.failures, r.detail),
    }
}

fn criterion(n: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let in_time = limit.is_none_or(|l| took < l);
    let passed = v.passed && in_time;
    let limit_note = limit.map_or(String::new(), |l| format!(" (limit {} s)", l.as_secs()));
    println!(
        "{} criterion {n}: {name}: {} [{:.1} s{limit_note}]",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
    );
    passed
}

fn fairness() -> Verdict {
    let pool = fairness_pool(&default_catalog());
    from_suite(fairness_suite(&pool, 10_000, 40, SEED), 10_000)
}

fn boundedness() -> Verdict {
    from_suite(boundedness_suite(&default_catalog().strategies, 100, 5_000, SEED), 100)
}

fn delta_defeats_catalog() -> Verdict {
    let catalog = default_catalog();
    let d = match build_delta(&GapSpec::Linear { a: 4, b: 8 }, &catalog.strategies, 2_000) {
        Ok(d) => d,
        Err(e) => {
            return Verdict {
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let fact1 = verify_fact1(&d);
    let mut bad = Vec::new();
    for (id, q) in &d.family {
        let s = catalog.strategy(id).expect("catalog member");
        let t = play_bits(&s, &d.bits, "delta", Budget::UNLIMITED);
        let bounded = t.max_converged().is_none_or(|m| m * q <= Rat::one());
        let partial_ok = t.values.iter().all(|v| !matches!(v, EvalOutcome::OutOfBudget { .. }));
        if !(bounded && partial_ok) {
            bad.push(id.clone());
        }
    }
    Verdict {
        passed: d.bits.len() >= 2_000 && d.family.len() == catalog.strategies.len() && bad.is_empty() && fact1.passed(),
        detail: format!(
            "|Δ| = {}, {} strategies, {} stages, stage agreement {}, unbounded: {:?}",
            d.bits.len(),
            d.family.len(),
            d.stages.len(),
            if fact1.passed() { "holds" } else { "fails" },
            bad
        ),
    }
}

fn totalization() -> Verdict {
    from_suite(
        totalization_suite(&default_catalog().strategies, 10, 10, 6, 100, SEED),
        1,
    )
}

fn markov() -> Verdict {
    let pool = oracle_pool(&default_catalog(), 11);
    let max_use = pool
        .iter()
        .map(|(d, len)| d.use_bound().map_or(u64::MAX, |u| u.at(*len)))
        .max()
        .unwrap_or(0);
    let mut v = from_suite(markov_suite(&pool, 1_000, SEED), 1_000);
    v.passed &= max_use <= 12;
    v.detail = format!("max use {max_use}; {}", v.detail);
    v
}

fn adversary() -> Verdict {
    const N: u64 = 8;
    const SEEDS: usize = 2_000;
    const TOLERANCE: f64 = 0.022;
    let adv = Adversary {
        order: MartingaleOrder,
        guess: 3,
    };
    let params = FireworksParams {
        thresholds: vec![N],
        rounds: N as usize + 4,
        budget_growth: 16,
    };
    let fails = (0..SEEDS)
        .filter(|&i| {
            let run = fireworks_run(
                &MartingaleOrder,
                &[&adv],
                &params,
                derive_seed(SEED, "acceptance/adversary", i as u64),
            )
            .expect("valid parameters");
            !run.statuses[0].is_met()
        })
        .count();
    let freq = fails as f64 / SEEDS as f64;
    let suite = adversary_suite(N, SEEDS, 3, SEED);
    Verdict {
        passed: (freq - 1.0 / N as f64).abs() <= TOLERANCE && suite.passed,
        detail: format!(
            "failure frequency {freq:.4} vs 0.125 ± {TOLERANCE}; suite: {}",
            suite.detail
        ),
    }
}

fn honest() -> Verdict {
    from_suite(honest_suite(64, 500, SEED), 500)
}

fn separation() -> Verdict {
    let cfg = SeparationConfig::default();
    let (a, b) = match (separation_experiment(&cfg), separation_experiment(&cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return Verdict {
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let bytes = render(&a.records(), Format::Jsonl);
    let reproducible = bytes == render(&b.records(), Format::Jsonl);

    // Exact side, re-played here rather than read from the report.
    let catalog = default_catalog();
    let bounded = a.delta.family.iter().all(|(id, q)| {
        let s = catalog.strategy(id).expect("catalog member");
        let t = play_bits(&s, &a.delta.bits, "delta", Budget::UNLIMITED);
        t.max_converged().is_none_or(|m| m * q <= Rat::one())
    });
    let ev = &a.evaluation;
    let statistical = ev.mu_g.is_positive() && ev.reached * 5 >= ev.met_all * 2 && ev.met_all > 0;
    let shape = a.stages.len() == 4 && cfg.estimation_seeds == 200 && ev.seeds == 500;
    Verdict {
        passed: reproducible && bounded && a.catalog_bounded() && statistical && shape,
        detail: format!(
            "catalog bounded {bounded}, μ̂(G) = {} ({}/{}), reached K = {} in {}/{} = {:.3}, thresholds {:?}, reproducible {reproducible} ({} bytes)",
            ev.mu_g,
            ev.met_all,
            ev.seeds,
            ev.target,
            ev.reached,
            ev.met_all,
            ev.reached_fraction_approx,
            a.stages.iter().map(|s| s.threshold).collect::<Vec<_>>(),
            bytes.len()
        ),
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "fairness fuzzing", Some(secs(10)), fairness),
        criterion(2, "diagonal boundedness", Some(secs(60)), boundedness),
        criterion(3, "Δ defeats the catalog", Some(secs(60)), delta_defeats_catalog),
        criterion(4, "totalization", None, totalization),
        criterion(5, "oracle averaging and Markov", None, markov),
        criterion(6, "fireworks 1/N bound", Some(secs(60)), adversary),
        criterion(7, "honest genericity", None, honest),
        criterion(8, "separation", Some(secs(600)), separation),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

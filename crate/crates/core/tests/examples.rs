use gamblers_core::bits::{bits, BitString};
use gamblers_core::bound::TimeBound;
use gamblers_core::catalog::{default_catalog, OracleRuleSpec, OracleStrategySpec, RuleSpec, StrategySpec};
use gamblers_core::diagonalization::{build_delta, diagonalize_finite, pick_weight, verify_fact1, GapSpec};
use gamblers_core::finite::{FairnessReport, FiniteMartingale};
use gamblers_core::fireworks::{
    dense_capital_set, doubling_witness, fireworks_run, generic_martingale, length_dense_set, Enumerator,
    FireworksParams, MartingaleOrder, Order,
};
use gamblers_core::martingale::{assess_success, eval, play, play_bits, Budget, EvalOutcome, Success};
use gamblers_core::sequence::{constant, periodic, replay, Registry};
use gamblers_core::transforms::{
    average_over_oracles, delayed_mixture_hat, mixture, oracle_profile, savings_split, savings_transform, scale,
    time_bound_totalize, DelayedCatalog,
};
use gamblers_core::{Rat, StrategyProgram};

fn r(n: i64, d: i64) -> Rat {
    Rat::frac(n, d)
}

fn strategy(id: &str, rule: RuleSpec) -> StrategyProgram {
    StrategySpec::new(id, rule).build().unwrap()
}

fn half_on(side: u8) -> StrategyProgram {
    strategy(&format!("half-on-{side}"), RuleSpec::Fixed { side, stake: r(1, 2) })
}

fn never() -> StrategyProgram {
    strategy("never", RuleSpec::Never)
}

/// Closed form of the half-on strategies: ×3/2 on a hit, ×1/2 on a miss.
fn half_on_model(side: bool, s: &BitString) -> Rat {
    s.iter()
        .map(|b| if b == side { r(3, 2) } else { r(1, 2) })
        .fold(Rat::one(), |a, x| a * x)
}

/// Capital of a reference member, `None` where it is undefined.
type Member = Box<dyn Fn(&BitString) -> Option<Rat>>;

fn conv(v: Rat) -> EvalOutcome {
    EvalOutcome::Converged { value: v }
}

fn values(t: &[EvalOutcome]) -> Vec<Rat> {
    t.iter().map(|v| v.value().cloned().unwrap()).collect()
}

/// Reference diagonalization: bit 1 exactly when the family holds at least
/// 1 on the 0 child.
fn model_diagonal(members: &[(Member, Rat)], sigma: &BitString, n: usize) -> BitString {
    let mut x = sigma.clone();
    for _ in 0..n {
        let zero = x.child(false);
        let held: Rat = members.iter().filter_map(|(f, q)| f(&zero).map(|v| v * q)).sum();
        x.push(held >= Rat::one());
    }
    x
}

fn largest_power_of_two_at_most(x: &Rat) -> Rat {
    (0..).map(|k| Rat::pow2(-k)).find(|p| p <= x).unwrap()
}

#[test]
fn fairness_check_examples() {
    assert!(FiniteMartingale::root().check_fairness().is_ok());
    let ok = FiniteMartingale::from_entries(1, [(bits("0"), r(3, 2)), (bits("1"), r(1, 2))]).unwrap();
    assert!(ok.check_fairness().is_ok());
    let bad = FiniteMartingale::from_entries(1, [(bits("0"), r(3, 2)), (bits("1"), Rat::one())]).unwrap();
    assert!(matches!(bad.check_fairness(), FairnessReport::Unfair { ref at } if at.is_empty()));
}

#[test]
fn eval_replays_the_bet_rule() {
    let d = half_on(0);
    for s in ["", "0", "01", "0010", "111", "0101101"] {
        let s = bits(s);
        assert_eq!(eval(&d, &s, Budget::steps(1000)), conv(half_on_model(false, &s)));
    }
    assert_eq!(eval(&d, &bits("0"), Budget::steps(100)), conv(r(3, 2)));
    assert_eq!(eval(&d, &bits("01"), Budget::steps(100)), conv(r(3, 4)));
    let div = strategy(
        "diverge-at-1",
        RuleSpec::DivergeAt {
            node: bits("1"),
            side: 0,
            stake: r(1, 2),
        },
    );
    assert_eq!(eval(&div, &bits("10"), Budget::UNLIMITED), EvalOutcome::Diverged);
}

#[test]
fn play_examples() {
    let t = play(&half_on(0), &constant(false), 3, Budget::UNLIMITED);
    assert_eq!(values(&t.values), vec![Rat::one(), r(3, 2), r(9, 4), r(27, 8)]);
    let t = play(&half_on(0), &constant(true), 3, Budget::UNLIMITED);
    assert_eq!(values(&t.values), vec![Rat::one(), r(1, 2), r(1, 4), r(1, 8)]);

    // Z = 01^∞ passes through "0", so a strategy that diverges there is
    // undefined from length 2 on. By hand: ε → 1, "0" → 1·(1 + 1/3).
    let z = periodic("01*", bits("0"), bits("1"));
    let div = strategy(
        "diverge-at-0",
        RuleSpec::DivergeAt {
            node: bits("0"),
            side: 0,
            stake: r(1, 3),
        },
    );
    let t = play(&div, &z, 2, Budget::UNLIMITED);
    assert_eq!(t.values, vec![conv(Rat::one()), conv(r(4, 3)), EvalOutcome::Diverged]);
    assert_eq!(t.first_divergence(), Some(2));
}

#[test]
fn success_examples() {
    let t = play(&half_on(0), &constant(false), 2, Budget::UNLIMITED);
    assert_eq!(assess_success(&t, &Rat::int(2)), Success::ReachedAt { length: 2 });
    let t = play(&half_on(0), &constant(true), 2, Budget::UNLIMITED);
    assert_eq!(
        assess_success(&t, &Rat::int(2)),
        Success::BoundedBelow { threshold: Rat::int(2) }
    );
    let div = strategy(
        "diverge-at-root",
        RuleSpec::DivergeAt {
            node: BitString::empty(),
            side: 0,
            stake: r(1, 2),
        },
    );
    let t = play(&div, &constant(false), 2, Budget::UNLIMITED);
    assert_eq!(assess_success(&t, &Rat::int(2)), Success::DivergedAt { length: 1 });
}

#[test]
fn registry_assigns_fresh_codes() {
    let reg = Registry::new();
    let z = constant(false);
    assert_eq!(reg.register(z.clone()), 0);
    assert_eq!(reg.register(constant(true)), 1);
    assert_eq!(reg.register(z), 2);
    assert_eq!(reg.len(), 3);
}

#[test]
fn scale_and_mixture_examples() {
    let d = half_on(0);
    let s = bits("0110");
    assert_eq!(
        eval(&scale(&d, &Rat::one()).unwrap(), &s, Budget::UNLIMITED),
        eval(&d, &s, Budget::UNLIMITED)
    );
    assert_eq!(
        eval(&scale(&d, &r(1, 2)).unwrap(), &BitString::empty(), Budget::UNLIMITED),
        conv(r(1, 2))
    );

    let single = mixture(&[(d.clone(), Rat::one())]).unwrap();
    assert_eq!(eval(&single, &s, Budget::UNLIMITED), eval(&d, &s, Budget::UNLIMITED));

    let m = mixture(&[(half_on(0), r(1, 2)), (half_on(1), r(1, 2))]).unwrap();
    assert_eq!(eval(&m, &BitString::empty(), Budget::UNLIMITED), conv(Rat::one()));
    assert_eq!(eval(&m, &bits("0"), Budget::UNLIMITED), conv(Rat::one()));
    for s in ["01", "110", "0001"] {
        let s = bits(s);
        let expected = (half_on_model(false, &s) + half_on_model(true, &s)) * r(1, 2);
        assert_eq!(eval(&m, &s, Budget::UNLIMITED), conv(expected));
    }
}

#[test]
fn savings_examples() {
    let c = savings_transform(&never());
    for s in ["", "0", "1011"] {
        assert_eq!(eval(&c, &bits(s), Budget::UNLIMITED), conv(Rat::one()));
        assert_eq!(savings_split(&never(), &bits(s)), Some((Rat::zero(), Rat::one())));
    }
    // Winning twice with half stakes reaches 9/4 ≥ 2, so 9/8 is banked.
    let (bank, active) = savings_split(&half_on(0), &bits("00")).unwrap();
    assert_eq!(bank, r(9, 8));
    assert_eq!(active, r(9, 8));
    // Losing from there keeps the bank.
    let (bank, _) = savings_split(&half_on(0), &bits("0011111111")).unwrap();
    assert_eq!(bank, r(9, 8));
}

#[test]
fn totalization_examples() {
    let d = half_on(0);
    let big = time_bound_totalize(&d, &TimeBound::Constant(1_000));
    let zero = time_bound_totalize(&d, &TimeBound::Constant(0));
    for s in ["", "0", "01", "1101", "000000"] {
        let s = bits(s);
        assert_eq!(eval(&big, &s, Budget::UNLIMITED), conv(half_on_model(false, &s)));
        assert_eq!(eval(&zero, &s, Budget::UNLIMITED), conv(Rat::one()));
    }
}

#[test]
fn delayed_mixture_examples() {
    let oblivious = |rule| {
        OracleStrategySpec {
            id: "ob".into(),
            rule: OracleRuleSpec::Oblivious { rule },
        }
        .build()
        .unwrap()
    };
    let c = DelayedCatalog::new(&[oblivious(RuleSpec::Never)]);
    let hat = delayed_mixture_hat(&c, &TimeBound::Unlimited).unwrap();
    for (w, s) in [("0", "1"), ("11", "0101")] {
        assert_eq!(
            eval(&hat.relativize(&bits(w)), &bits(s), Budget::UNLIMITED),
            conv(r(1, 2))
        );
    }

    let members: Vec<_> = default_catalog().oracle_strategies.clone();
    let c = DelayedCatalog::new(&members);
    let hat = delayed_mixture_hat(&c, &TimeBound::Unlimited).unwrap();
    let expected: Rat = members
        .iter()
        .enumerate()
        .map(|(i, m)| m.program().relativize(&BitString::empty()).initial_capital() * Rat::pow2(-(i as i64 + 1)))
        .sum();
    for w in ["", "0", "1", "0110"] {
        assert_eq!(
            eval(&hat.relativize(&bits(w)), &BitString::empty(), Budget::UNLIMITED),
            conv(expected.clone())
        );
    }
}

#[test]
fn oracle_average_examples() {
    let ob = OracleStrategySpec {
        id: "ob".into(),
        rule: OracleRuleSpec::Oblivious {
            rule: RuleSpec::Fixed {
                side: 0,
                stake: r(1, 2),
            },
        },
    }
    .build()
    .unwrap()
    .program();
    for s in ["", "0", "01", "110"] {
        let s = bits(s);
        assert_eq!(average_over_oracles(&ob, &s).unwrap(), half_on_model(false, &s));
    }

    // The first-bit strategy bets 1/2 on the oracle's first bit; enumerate
    // both oracles by hand.
    let fb = OracleStrategySpec {
        id: "fb".into(),
        rule: OracleRuleSpec::OracleFirstBit { stake: r(1, 2) },
    }
    .build()
    .unwrap()
    .program();
    for s in ["0", "01", "000", "1011"] {
        let s = bits(s);
        let by_hand = (half_on_model(false, &s) + half_on_model(true, &s)) * r(1, 2);
        assert_eq!(average_over_oracles(&fb, &s).unwrap(), by_hand);
    }
    let p = oracle_profile(&fb, &bits("0")).unwrap();
    assert_eq!(p.fraction_at_least(&r(3, 2)), r(1, 2));
    assert!(p.fraction_at_least(&r(3, 2)) * r(3, 2) <= p.average());
}

#[test]
fn pick_weight_examples() {
    assert_eq!(pick_weight(&BitString::empty(), &[], &half_on(0)).unwrap(), r(1, 2));
    // S = 1/2 at "00" from a never-betting member at weight 1/2; the new
    // member holds 9/4 there, so the weight is the power of two below
    // (1/2)/(2·9/4) = 1/9.
    let family = vec![(never(), r(1, 2))];
    let q = pick_weight(&bits("00"), &family, &half_on(0)).unwrap();
    assert_eq!(q, largest_power_of_two_at_most(&r(1, 9)));
    assert_eq!(q, r(1, 16));
    assert!(r(1, 2) + &q * r(9, 4) < Rat::one());
    // S = 1/2 and a member at capital 2: 1/8.
    let two = strategy("two", RuleSpec::Never);
    let two = scale(&two, &Rat::int(2)).unwrap();
    assert_eq!(pick_weight(&bits("1"), &family, &two).unwrap(), r(1, 8));
}

#[test]
fn diagonal_against_half_on_zero() {
    let x = diagonalize_finite(&[(half_on(0), r(1, 2))], &BitString::empty()).unwrap();
    let prefix = x.prefix(7);
    let member: Member = Box::new(|s| Some(half_on_model(false, s)));
    assert_eq!(prefix, model_diagonal(&[(member, r(1, 2))], &BitString::empty(), 7));
    assert_eq!(prefix, bits("0100100"));
    let weighted: Vec<Rat> = (0..=6)
        .map(|l| half_on_model(false, &prefix.prefix(l)) * r(1, 2))
        .collect();
    assert_eq!(
        weighted,
        vec![r(1, 2), r(3, 4), r(3, 8), r(9, 16), r(27, 32), r(27, 64), r(81, 128)]
    );
    assert!(weighted.iter().all(|v| v < &Rat::one()));
}

#[test]
fn diagonal_against_never_betting_is_zeros() {
    let x = diagonalize_finite(&[(never(), r(7, 8))], &bits("1")).unwrap();
    assert_eq!(x.prefix(9), bits("100000000"));
}

#[test]
fn diagonal_drops_diverged_members() {
    // The first member diverges at "00"; from there the diagonal plays
    // against half-on-1 alone.
    let div = strategy(
        "diverge-at-00",
        RuleSpec::DivergeAt {
            node: bits("00"),
            side: 1,
            stake: r(1, 2),
        },
    );
    let family = vec![(div.clone(), r(1, 4)), (half_on(1), r(1, 2))];
    let x = diagonalize_finite(&family, &BitString::empty()).unwrap();
    let by_hand: Member = Box::new(|s: &BitString| {
        (!bits("000").is_prefix_of(s) && !bits("001").is_prefix_of(s)).then(|| half_on_model(true, s))
    });
    let h1: Member = Box::new(|s| Some(half_on_model(true, s)));
    let expected = model_diagonal(&[(by_hand, r(1, 4)), (h1, r(1, 2))], &BitString::empty(), 12);
    assert_eq!(x.prefix(12), expected);
    assert!(bits("00").is_prefix_of(&expected));
    assert_eq!(eval(&div, &expected, Budget::UNLIMITED), EvalOutcome::Diverged);
}

#[test]
fn delta_examples() {
    let d = build_delta(&GapSpec::Constant(2), &[half_on(0)], 2).unwrap();
    assert_eq!(d.bits, bits("01"));
    assert!(verify_fact1(&d).passed());

    let d = build_delta(&GapSpec::Constant(3), &[never(), never()], 12).unwrap();
    assert_eq!(d.bits, BitString::zeros(12));
}

#[test]
fn delta_matches_a_reference_construction() {
    let d = build_delta(&GapSpec::Constant(3), &[half_on(0), half_on(1)], 9).unwrap();
    // Stage 0 introduces half-on-0 at 1/2 and copies "010". At σ = "010"
    // half-on-0 holds 9/8, so S = 9/16; half-on-1 peaks at 1 on ε, giving
    // the power of two below 7/32.
    assert_eq!(d.family[0], ("half-on-0".to_string(), r(1, 2)));
    let s = half_on_model(false, &bits("010")) * r(1, 2);
    assert_eq!(s, r(9, 16));
    let q = largest_power_of_two_at_most(&((Rat::one() - s) / Rat::int(2)));
    assert_eq!(d.family[1], ("half-on-1".to_string(), q.clone()));
    let h0: Member = Box::new(|s| Some(half_on_model(false, s)));
    let h1: Member = Box::new(|s| Some(half_on_model(true, s)));
    let stage0 = model_diagonal(&[(h0, r(1, 2))], &BitString::empty(), 3);
    assert_eq!(stage0, bits("010"));
    let h0: Member = Box::new(|s| Some(half_on_model(false, s)));
    let rest = model_diagonal(&[(h0, r(1, 2)), (h1, q)], &stage0, 6);
    assert_eq!(d.bits, rest);
    assert!(verify_fact1(&d).passed());
}

#[test]
fn agreement_grows_with_the_gap() {
    let catalog: Vec<_> = default_catalog().strategies.clone();
    for t in [1usize, 100] {
        let d = build_delta(&GapSpec::Constant(t), &catalog, 400).unwrap();
        let report = verify_fact1(&d);
        assert!(report.passed());
        for c in &report.checks {
            assert!(c.agreed_len >= c.required_len.min(d.bits.len()));
        }
        for s in &d.stages {
            assert_eq!(s.agreement_len() - s.sigma_len, t);
        }
    }
}

#[test]
fn fact1_reports_corruption() {
    let mut d = build_delta(&GapSpec::Constant(4), &[half_on(0), half_on(1)], 12).unwrap();
    let pos = 5;
    let flipped: Vec<bool> = d
        .bits
        .iter()
        .enumerate()
        .map(|(i, b)| if i == pos { !b } else { b })
        .collect();
    d.bits = BitString::from_bits(flipped);
    let report = verify_fact1(&d);
    assert!(!report.passed());
    assert_eq!(report.first_mismatch(), Some((1, pos)));
}

#[test]
fn doubling_witness_example() {
    let z = constant(false);
    let g = doubling_witness(&FiniteMartingale::root(), &z, &Rat::int(3), &r(1, 2));
    assert_eq!(g.length(), 3);
    for (s, v) in [
        ("0", r(3, 2)),
        ("1", r(1, 2)),
        ("00", r(9, 4)),
        ("01", r(3, 4)),
        ("000", r(27, 8)),
    ] {
        assert_eq!(g.value(&bits(s)), v, "at {s}");
    }
    assert!(g.check_fairness().is_ok());
    let w = dense_capital_set(z.clone(), Rat::int(3));
    assert!(w.contains(&g));
    assert!(!w.contains(&FiniteMartingale::root()));
    assert!(!w.contains(&FiniteMartingale::root().with_length(6)));

    // The witness chain as a strategy: 27/8 at "000", no bets beyond.
    let run_like = g.to_strategy("witness");
    assert_eq!(eval(&run_like, &bits("000"), Budget::UNLIMITED), conv(r(27, 8)));
    assert_eq!(eval(&run_like, &bits("000101"), Budget::UNLIMITED), conv(r(27, 8)));

    let same = doubling_witness(&g, &z, &r(1, 2), &r(1, 2));
    assert_eq!(same, g);
}

#[test]
fn length_dense_examples() {
    let root = FiniteMartingale::root();
    assert!(length_dense_set(MartingaleOrder, 0).contains(&root));
    assert!(!length_dense_set(MartingaleOrder, 1).contains(&root));
    let mut p = root;
    for _ in 0..4 {
        p = MartingaleOrder.default_extend(&p);
    }
    assert!(length_dense_set(MartingaleOrder, 4).contains(&p));
}

#[test]
fn fireworks_length_requirement() {
    let req = length_dense_set(MartingaleOrder, 5);
    let refs: Vec<&dyn Enumerator<FiniteMartingale>> = vec![&req];
    let params = FireworksParams {
        thresholds: vec![1],
        rounds: 10,
        budget_growth: 16,
    };
    for seed in 0..20 {
        let run = fireworks_run(&MartingaleOrder, &refs, &params, seed).unwrap();
        assert!(run.all_met());
        assert!(run.final_condition().length() >= 5);
        let g = generic_martingale(&run);
        assert!(g.initial_capital() == Rat::one());
    }

    let none: Vec<&dyn Enumerator<FiniteMartingale>> = Vec::new();
    let run = fireworks_run(
        &MartingaleOrder,
        &none,
        &FireworksParams {
            thresholds: vec![],
            ..params
        },
        3,
    )
    .unwrap();
    assert_eq!(run.final_condition().length(), 10);
    let g = generic_martingale(&run);
    let t = play_bits(&g, &bits("0110101"), "x", Budget::UNLIMITED);
    assert!(t.values.iter().all(|v| v == &conv(Rat::one())));
}

#[test]
fn generic_martingale_of_replayed_sequence() {
    let z = replay("z", bits("0110"));
    let w = dense_capital_set(z.clone(), Rat::int(2));
    let refs: Vec<&dyn Enumerator<FiniteMartingale>> = vec![&w];
    let params = FireworksParams {
        thresholds: vec![2],
        rounds: 8,
        budget_growth: 64,
    };
    let run = fireworks_run(&MartingaleOrder, &refs, &params, 11).unwrap();
    assert!(run.all_met());
    let g = generic_martingale(&run);
    let hit = w.first_hit(run.final_condition()).unwrap();
    let t = play(&g, &z, hit, Budget::UNLIMITED);
    assert_eq!(assess_success(&t, &Rat::int(2)), Success::ReachedAt { length: hit });
}

//! Workload generator sizes and runner behaviour at small scales.

use contractlog::bench::{
    fit_linear, generate, predicted_literals, run, BenchSpec, Family, Variant,
};
use contractlog::solve::Truth;
use contractlog::{KnowledgeState, ModuleId};
use std::time::Duration;

const BUDGET: Duration = Duration::from_secs(20);

/// Post-translation literal count, measured on a real knowledge state.
fn translated_size(family: Family, variant: Variant) -> usize {
    let generated = generate(&BenchSpec { family, variant, defeasible: true, memo: false });
    KnowledgeState::new()
        .add_module(ModuleId::named("bench"), generated.clauses)
        .unwrap()
        .active_size()
}

#[test]
fn generated_sizes_match_the_closed_forms() {
    let families = [
        Family::Chains { n: 1 },
        Family::Chains { n: 17 },
        Family::Dag { n: 2, k: 3 },
        Family::Dag { n: 3, k: 1 },
        Family::Tree { n: 2, k: 2 },
        Family::Tree { n: 3, k: 3 },
        Family::Tree { n: 4, k: 1 },
        Family::EcaPlain { n: 5 },
        Family::EcHoldsat { n: 6 },
        Family::EcHoldsat { n: 7 },
    ];
    for family in families {
        for variant in [Variant::Propositional, Variant::Datalog] {
            let spec = BenchSpec { family, variant, defeasible: false, memo: false };
            assert_eq!(
                generate(&spec).literals,
                predicted_literals(family, false),
                "strict {}",
                spec
            );
        }
        assert_eq!(
            translated_size(family, Variant::Propositional),
            predicted_literals(family, true),
            "defeasible {}",
            family
        );
    }
}

#[test]
fn benchmark_grid_sizes() {
    let rows: [(Family, usize, usize); 6] = [
        (Family::Chains { n: 1000 }, 2001, 11001),
        (Family::Dag { n: 3, k: 3 }, 39, 156),
        (Family::Dag { n: 10, k: 10 }, 1110, 3810),
        (Family::Tree { n: 3, k: 3 }, 79, 248),
        (Family::Tree { n: 4, k: 3 }, 241, 761),
        (Family::Tree { n: 8, k: 3 }, 19681, 62321),
    ];
    for (family, strict, defeasible) in rows {
        assert_eq!(predicted_literals(family, false), strict, "strict {}", family);
        assert_eq!(predicted_literals(family, true), defeasible, "defeasible {}", family);
    }
    assert_eq!(predicted_literals(Family::EcHoldsat { n: 1000 }, false), 1002);
}

#[test]
fn every_small_configuration_answers_true() {
    let families = [
        Family::Chains { n: 2 },
        Family::Dag { n: 2, k: 2 },
        Family::Tree { n: 2, k: 2 },
    ];
    for family in families {
        for variant in [Variant::Propositional, Variant::Datalog] {
            for defeasible in [false, true] {
                for memo in [false, true] {
                    let spec = BenchSpec { family, variant, defeasible, memo };
                    let r = run(&spec, BUDGET);
                    assert_eq!(r.error, None, "{}", spec);
                    assert!(!r.exhausted, "{}", spec);
                    assert_eq!(r.truth, Truth::True, "{}", spec);
                }
            }
        }
    }
}

#[test]
fn event_history_query_holds_at_the_end() {
    for n in [1, 2, 5, 40] {
        for memo in [false, true] {
            let spec = BenchSpec {
                family: Family::EcHoldsat { n },
                variant: Variant::Propositional,
                defeasible: false,
                memo,
            };
            let r = run(&spec, BUDGET);
            assert_eq!(r.error, None, "{}", spec);
            assert_eq!(r.truth, Truth::True, "{}", spec);
            assert_eq!(r.literals, n + 2);
        }
    }
}

#[test]
fn reaction_rules_all_fire_with_split_timings() {
    let spec = BenchSpec::new(Family::EcaPlain { n: 3 });
    let r = run(&spec, BUDGET);
    assert_eq!(r.truth, Truth::True);
    assert_eq!(r.literals, 6);
    assert!(r.discover.is_some() && r.evaluate.is_some());
}

#[test]
fn tiny_budget_reports_exhaustion() {
    let spec = BenchSpec::new(Family::Dag { n: 10, k: 10 });
    let r = run(&spec, Duration::from_millis(150));
    assert!(r.exhausted, "wide lattice should not finish in 150ms unmemoized");
    assert_eq!(r.truth, Truth::Unknown);
    assert_eq!(r.error, None);
}

#[test]
fn memoization_solves_the_wide_lattice() {
    let spec = BenchSpec::new(Family::Dag { n: 10, k: 10 }).memo();
    let r = run(&spec, BUDGET);
    assert_eq!(r.error, None);
    assert!(!r.exhausted);
    assert_eq!(r.truth, Truth::True);
    assert!(r.memo_entries >= 110, "one table per atom, got {}", r.memo_entries);
}

#[test]
fn least_squares_recovers_a_line() {
    let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 3.5 * i as f64 + 2.0)).collect();
    let fit = fit_linear(&pts);
    assert!((fit.slope - 3.5).abs() < 1e-9);
    assert!((fit.intercept - 2.0).abs() < 1e-9);
    assert!((fit.r2 - 1.0).abs() < 1e-9);

    let bent: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, (i * i) as f64)).collect();
    assert!(fit_linear(&bent).r2 < 0.98);
}

//! Complex event detection against the brute-force reference and the
//! documented operator behaviours.

mod support;

use contractlog::ec::algebra::{detect_complex, EventExpr};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use support::{engine_detect, gen_expr, gen_world, world_session, RefExpr};

fn world(pairs: &[(&str, i64)]) -> Vec<(String, i64)> {
    pairs.iter().map(|(n, t)| (n.to_string(), *t)).collect()
}

fn detect(pairs: &[(&str, i64)], expr: &str) -> BTreeSet<(i64, i64)> {
    let mut session = world_session(&world(pairs));
    engine_detect(&mut session, expr)
}

#[test]
fn sequence_chains_ordered_events() {
    let w = [("a", 1), ("b", 2), ("c", 3)];
    assert_eq!(detect(&w, "sequence(a, b, c)"), BTreeSet::from([(1, 3)]));
    assert_eq!(detect(&w, "sequence(c, a)"), BTreeSet::new());
}

#[test]
fn sequence_broken_by_own_alphabet() {
    // The second b falls inside every candidate gap, so no chain survives.
    let w = [("a", 1), ("b", 2), ("b", 3), ("c", 5)];
    assert_eq!(detect(&w, "sequence(a, b, c)"), BTreeSet::new());
    // An unrelated event inside a gap does not interrupt.
    let w = [("a", 1), ("b", 2), ("x", 3), ("c", 5)];
    assert_eq!(detect(&w, "sequence(a, b, c)"), BTreeSet::from([(1, 5)]));
}

#[test]
fn sequence_allows_touching_operands() {
    assert_eq!(detect(&[("a", 2), ("b", 2)], "sequence(a, b)"), BTreeSet::from([(2, 2)]));
}

#[test]
fn any_counts_occurrences() {
    let two = [("ping_fail", 1), ("ping_fail", 4)];
    assert_eq!(detect(&two, "any(3, ping_fail)"), BTreeSet::new());
    let three = [("ping_fail", 1), ("ping_fail", 4), ("ping_fail", 6)];
    assert_eq!(detect(&three, "any(3, ping_fail)"), BTreeSet::from([(6, 6)]));
}

#[test]
fn and_takes_the_envelope() {
    assert_eq!(detect(&[("a", 5), ("b", 2)], "and(a, b)"), BTreeSet::from([(2, 5)]));
}

#[test]
fn or_is_the_union() {
    assert_eq!(
        detect(&[("a", 1), ("b", 4)], "or(a, b)"),
        BTreeSet::from([(1, 1), (4, 4)])
    );
}

#[test]
fn xor_requires_exactly_one_alternative() {
    assert_eq!(detect(&[("a", 1)], "xor(a, b)"), BTreeSet::from([(1, 1)]));
    assert_eq!(detect(&[("a", 1), ("b", 4)], "xor(a, b)"), BTreeSet::new());
    assert_eq!(detect(&[], "xor(a, b)"), BTreeSet::new());
}

#[test]
fn concurrent_needs_the_same_instant() {
    assert_eq!(
        detect(&[("a", 3), ("b", 3), ("b", 5)], "concurrent(a, b)"),
        BTreeSet::from([(3, 3)])
    );
    assert_eq!(detect(&[("a", 3), ("b", 5)], "concurrent(a, b)"), BTreeSet::new());
}

#[test]
fn neg_rejects_terminators_inside_the_window() {
    let quiet = [("open", 1), ("close", 6)];
    assert_eq!(detect(&quiet, "neg([alarm], [open, close])"), BTreeSet::from([(1, 6)]));
    let noisy = [("open", 1), ("alarm", 3), ("close", 6)];
    assert_eq!(detect(&noisy, "neg([alarm], [open, close])"), BTreeSet::new());
}

#[test]
fn aperiodic_collects_occurrences_strictly_inside() {
    let w = [("open", 1), ("e", 1), ("e", 3), ("e", 4), ("close", 6), ("e", 6)];
    assert_eq!(
        detect(&w, "aperiodic(e, [open, close])"),
        BTreeSet::from([(3, 3), (4, 4)])
    );
}

#[test]
fn bindings_flow_through_sequences() {
    // The alphabet is instantiated per chain, so other customers' events do
    // not interrupt a chain they are not part of.
    let mut session = support::session_with_ec(
        "happens(request(c1), 1). happens(request(c2), 2).\n\
         happens(approve(c1), 5). happens(approve(c2), 3).",
    );
    let term = contractlog::parse::parse_term("sequence(request(C), approve(C))").unwrap();
    let expr = EventExpr::from_term(&term).unwrap();
    let ds = detect_complex(&mut session, &expr).unwrap();
    let shown: Vec<String> =
        ds.iter().map(|d| format!("[{}, {}] {}", d.start, d.end, d.subst)).collect();
    assert_eq!(shown, ["[1, 5] C = c1", "[2, 3] C = c2"]);
}

#[test]
fn same_binding_event_interrupts_its_own_chain() {
    let mut session = support::session_with_ec(
        "happens(request(c1), 1). happens(request(c1), 3). happens(approve(c1), 5).",
    );
    let term = contractlog::parse::parse_term("sequence(request(C), approve(C))").unwrap();
    let expr = EventExpr::from_term(&term).unwrap();
    let ds = detect_complex(&mut session, &expr).unwrap();
    let shown: Vec<String> =
        ds.iter().map(|d| format!("[{}, {}] {}", d.start, d.end, d.subst)).collect();
    // The repeated request at 3 breaks the chain started at 1.
    assert_eq!(shown, ["[3, 5] C = c1"]);
}

#[test]
fn consumed_events_are_not_detected_again() {
    let mut session = support::session_with_ec("happens(a, 1). happens(a, 4). happens(b, 6).");
    assert_eq!(engine_detect(&mut session, "sequence(a, b)"), BTreeSet::from([(4, 6)]));
    let consume = contractlog::parse::parse_term("consume(a)").unwrap();
    contractlog::solve::solve_goal(&mut session, &consume).unwrap();
    assert_eq!(engine_detect(&mut session, "sequence(a, b)"), BTreeSet::new());
}

#[test]
fn operators_match_brute_force_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for op in 0..8 {
        for case in 0..40 {
            let w = gen_world(&mut rng);
            let e = gen_expr(&mut rng, op, 1);
            if let Err((got, expected)) = support::compare_case(&w, &e) {
                panic!(
                    "operator {} case {}: {} over {:?}\n  engine    {:?}\n  reference {:?}",
                    op,
                    case,
                    e.text(),
                    w,
                    got,
                    expected
                );
            }
        }
    }
}

#[test]
fn nested_operand_mix_matches_reference() {
    let w = world(&[("a", 1), ("b", 2), ("c", 4), ("a", 5), ("d", 7)]);
    for text in [
        "sequence(or(a, b), c)",
        "and(sequence(a, b), c)",
        "xor(sequence(a, d), concurrent(b, c))",
        "neg([b], [a, d])",
        "aperiodic(or(b, c), [a, d])",
        "any(2, or(a, b))",
    ] {
        let term = contractlog::parse::parse_term(text).unwrap();
        let expr = EventExpr::from_term(&term).unwrap();
        let mut session = world_session(&w);
        let got: BTreeSet<(i64, i64)> = detect_complex(&mut session, &expr)
            .unwrap()
            .into_iter()
            .map(|d| (d.start as i64, d.end as i64))
            .collect();
        let reference = support::reference_detect(&w, &parse_ref(text));
        assert_eq!(got, reference, "for {}", text);
    }
}

/// Tiny recursive-descent mirror of the functional notation, so directed
/// nested cases can be checked against the reference too.
fn parse_ref(text: &str) -> RefExpr {
    let term = contractlog::parse::parse_term(text).unwrap();
    build_ref(&term)
}

fn build_ref(t: &contractlog::Term) -> RefExpr {
    use contractlog::Term;
    let Term::Complex { functor, args } = t else {
        return RefExpr::Atom(t.to_string());
    };
    let sub = |args: &[Term]| args.iter().map(build_ref).collect::<Vec<_>>();
    match functor.as_str() {
        "sequence" => RefExpr::Seq(sub(args)),
        "or" => RefExpr::Or(sub(args)),
        "xor" => RefExpr::Xor(sub(args)),
        "and" => RefExpr::And(sub(args)),
        "concurrent" => RefExpr::Conc(sub(args)),
        "neg" => {
            let ts = args[0].as_list().unwrap().iter().map(|t| t.to_string()).collect();
            let w = args[1].as_list().unwrap();
            RefExpr::Neg(ts, Box::new(build_ref(&w[0])), Box::new(build_ref(&w[1])))
        }
        "any" => {
            let Term::Num(n) = &args[0] else { panic!("count") };
            RefExpr::Any(n.as_int().unwrap() as usize, Box::new(build_ref(&args[1])))
        }
        "aperiodic" => {
            let w = args[1].as_list().unwrap();
            RefExpr::Aper(
                Box::new(build_ref(&args[0])),
                Box::new(build_ref(&w[0])),
                Box::new(build_ref(&w[1])),
            )
        }
        _ => RefExpr::Atom(t.to_string()),
    }
}

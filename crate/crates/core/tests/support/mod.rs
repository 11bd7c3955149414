//! Shared helpers for integration tests: session builders and a brute-force
//! reference for complex event detection.
//!
//! The reference works on a plain event history (name, integer time) and
//! computes detection interval sets per operator definition by exhaustive
//! enumeration, with no solver involved. Engine results must match it
//! exactly on ground histories.

#![allow(dead_code)]

use contractlog::ec;
use contractlog::solve::Session;
use contractlog::{KnowledgeState, ModuleId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub fn session_with_ec(program: &str) -> Session {
    let prog = contractlog::parse::parse_program(program).expect("test program parses");
    let st = ec::install(KnowledgeState::new()).expect("axioms install");
    let st = st.add_module(ModuleId::named("test"), prog.clauses).expect("module loads");
    Session::new(st)
}

/// A ground event history as a logic program plus the EC axioms.
pub fn world_session(world: &[(String, i64)]) -> Session {
    let text: String =
        world.iter().map(|(e, t)| format!("happens({}, {}).\n", e, t)).collect();
    session_with_ec(&text)
}

/// Engine-side detection intervals for an expression in functional notation.
pub fn engine_detect(session: &mut Session, expr_text: &str) -> BTreeSet<(i64, i64)> {
    let term = contractlog::parse::parse_term(expr_text).expect("expression parses");
    let expr = ec::algebra::EventExpr::from_term(&term).expect("expression well-formed");
    ec::algebra::detect_complex(session, &expr)
        .expect("detection succeeds")
        .into_iter()
        .map(|d| (d.start as i64, d.end as i64))
        .collect()
}

// --- Reference implementation ----------------------------------------------

#[derive(Clone, Debug)]
pub enum RefExpr {
    Atom(String),
    Seq(Vec<RefExpr>),
    Or(Vec<RefExpr>),
    Xor(Vec<RefExpr>),
    And(Vec<RefExpr>),
    Conc(Vec<RefExpr>),
    Neg(Vec<String>, Box<RefExpr>, Box<RefExpr>),
    Any(usize, Box<RefExpr>),
    Aper(Box<RefExpr>, Box<RefExpr>, Box<RefExpr>),
}

impl RefExpr {
    /// The same functional notation the engine parses.
    pub fn text(&self) -> String {
        fn join(es: &[RefExpr]) -> String {
            es.iter().map(|e| e.text()).collect::<Vec<_>>().join(", ")
        }
        match self {
            RefExpr::Atom(a) => a.clone(),
            RefExpr::Seq(es) => format!("sequence({})", join(es)),
            RefExpr::Or(es) => format!("or({})", join(es)),
            RefExpr::Xor(es) => format!("xor({})", join(es)),
            RefExpr::And(es) => format!("and({})", join(es)),
            RefExpr::Conc(es) => format!("concurrent({})", join(es)),
            RefExpr::Neg(ts, a, b) => {
                format!("neg([{}], [{}, {}])", ts.join(", "), a.text(), b.text())
            }
            RefExpr::Any(n, e) => format!("any({}, {})", n, e.text()),
            RefExpr::Aper(e, a, b) => {
                format!("aperiodic({}, [{}, {}])", e.text(), a.text(), b.text())
            }
        }
    }

    /// Atomic event names, window events included, terminator lists not.
    fn alphabet(&self, out: &mut BTreeSet<String>) {
        match self {
            RefExpr::Atom(a) => {
                out.insert(a.clone());
            }
            RefExpr::Seq(es)
            | RefExpr::Or(es)
            | RefExpr::Xor(es)
            | RefExpr::And(es)
            | RefExpr::Conc(es) => es.iter().for_each(|e| e.alphabet(out)),
            RefExpr::Neg(_, a, b) => {
                a.alphabet(out);
                b.alphabet(out);
            }
            RefExpr::Any(_, e) => e.alphabet(out),
            RefExpr::Aper(e, a, b) => {
                e.alphabet(out);
                a.alphabet(out);
                b.alphabet(out);
            }
        }
    }
}

/// Detection intervals by direct enumeration over the history.
pub fn reference_detect(world: &[(String, i64)], expr: &RefExpr) -> BTreeSet<(i64, i64)> {
    match expr {
        RefExpr::Atom(a) => world
            .iter()
            .filter(|(n, _)| n == a)
            .map(|(_, t)| (*t, *t))
            .collect(),
        RefExpr::Seq(es) => {
            let mut alphabet = BTreeSet::new();
            expr.alphabet(&mut alphabet);
            let interrupted = |from: i64, to: i64| {
                world.iter().any(|(n, t)| alphabet.contains(n) && *t > from && *t < to)
            };
            let mut chains = reference_detect(world, &es[0]);
            for op in &es[1..] {
                let ds = reference_detect(world, op);
                let mut next = BTreeSet::new();
                for &(s0, e0) in &chains {
                    for &(s1, e1) in &ds {
                        if s1 >= e0 && !interrupted(e0, s1) {
                            next.insert((s0, e1));
                        }
                    }
                }
                chains = next;
            }
            chains
        }
        RefExpr::Or(es) => es.iter().flat_map(|e| reference_detect(world, e)).collect(),
        RefExpr::Xor(es) => {
            let sets: Vec<_> = es
                .iter()
                .map(|e| reference_detect(world, e))
                .filter(|s| !s.is_empty())
                .collect();
            if sets.len() == 1 { sets.into_iter().next().unwrap() } else { BTreeSet::new() }
        }
        RefExpr::And(es) => {
            let mut partial = BTreeSet::from([(i64::MAX, i64::MIN)]);
            for e in es {
                let ds = reference_detect(world, e);
                partial = partial
                    .iter()
                    .flat_map(|&(s0, e0)| {
                        ds.iter().map(move |&(s1, e1)| (s0.min(s1), e0.max(e1)))
                    })
                    .collect();
            }
            partial
        }
        RefExpr::Conc(es) => {
            let mut sets = es.iter().map(|e| reference_detect(world, e));
            let first = sets.next().unwrap();
            sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
        }
        RefExpr::Neg(terms, a, b) => {
            let mut out = BTreeSet::new();
            for &(s1, e1) in &reference_detect(world, a) {
                for &(s2, e2) in &reference_detect(world, b) {
                    let broken = world
                        .iter()
                        .any(|(n, t)| terms.contains(n) && *t > s1 && *t < e2);
                    if s2 >= e1 && !broken {
                        out.insert((s1, e2));
                    }
                }
            }
            out
        }
        RefExpr::Any(n, e) => {
            let mut ds: Vec<_> = reference_detect(world, e).into_iter().collect();
            ds.sort_by_key(|&(s, e)| (e, s));
            ds.into_iter().nth(n - 1).into_iter().collect()
        }
        RefExpr::Aper(e, a, b) => {
            let mut out = BTreeSet::new();
            for &(s1, e1) in &reference_detect(world, a) {
                for &(s2, e2) in &reference_detect(world, b) {
                    if s2 < e1 {
                        continue;
                    }
                    for &(ds, de) in &reference_detect(world, e) {
                        if ds > s1 && de < e2 {
                            out.insert((ds, de));
                        }
                    }
                }
            }
            out
        }
    }
}

// --- Random cases -----------------------------------------------------------

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

pub fn gen_world(rng: &mut ChaCha8Rng) -> Vec<(String, i64)> {
    let n = rng.gen_range(1..=6);
    (0..n)
        .map(|_| (NAMES[rng.gen_range(0..NAMES.len())].to_string(), rng.gen_range(0..8)))
        .collect()
}

fn gen_operand(rng: &mut ChaCha8Rng, depth: usize) -> RefExpr {
    if depth == 0 || rng.gen_bool(0.7) {
        RefExpr::Atom(NAMES[rng.gen_range(0..NAMES.len())].to_string())
    } else {
        let op = rng.gen_range(0..8);
        gen_expr(rng, op, depth - 1)
    }
}

/// A random expression with the given top operator (0..8 = sequence, or,
/// xor, and, concurrent, neg, any, aperiodic).
pub fn gen_expr(rng: &mut ChaCha8Rng, op: usize, depth: usize) -> RefExpr {
    let operands = |rng: &mut ChaCha8Rng, depth| {
        let n = rng.gen_range(2..=3);
        (0..n).map(|_| gen_operand(rng, depth)).collect::<Vec<_>>()
    };
    match op {
        0 => RefExpr::Seq(operands(rng, depth)),
        1 => RefExpr::Or(operands(rng, depth)),
        2 => RefExpr::Xor(operands(rng, depth)),
        3 => RefExpr::And(operands(rng, depth)),
        4 => RefExpr::Conc(operands(rng, depth)),
        5 => {
            let k = rng.gen_range(0..=2);
            let ts = (0..k).map(|_| NAMES[rng.gen_range(0..NAMES.len())].to_string()).collect();
            RefExpr::Neg(ts, Box::new(gen_operand(rng, depth)), Box::new(gen_operand(rng, depth)))
        }
        6 => RefExpr::Any(rng.gen_range(1..=4), Box::new(gen_operand(rng, depth))),
        _ => RefExpr::Aper(
            Box::new(gen_operand(rng, depth)),
            Box::new(gen_operand(rng, depth)),
            Box::new(gen_operand(rng, depth)),
        ),
    }
}

/// One engine-vs-reference comparison; returns the pair on mismatch.
pub fn compare_case(
    world: &[(String, i64)],
    expr: &RefExpr,
) -> Result<(), (BTreeSet<(i64, i64)>, BTreeSet<(i64, i64)>)> {
    let expected = reference_detect(world, expr);
    let mut session = world_session(world);
    let got = engine_detect(&mut session, &expr.text());
    if got == expected { Ok(()) } else { Err((got, expected)) }
}

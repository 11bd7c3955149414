//! Defeasible rule support.
//!
//! A module containing defeasible clauses is activated through a meta-program
//! translation. For a labeled defeasible rule
//!
//! ```text
//! (r) p <= q1, ..., qb.
//! ```
//!
//! the active module contains instead:
//!
//! ```text
//! oid(m, p).
//! oid(r, p).
//! neg(blocked(defeasible(p))) :- testIntegrity(p), defeasible(q1), ..., defeasible(qb).
//! body(defeasible(p)) :- defeasible(q1), ..., defeasible(qb).
//! defeasible(p) :- testIntegrity(p), defeasible(q1), ..., defeasible(qb), not(defeated(r, p)).
//! ```
//!
//! which is 8 + 3b literals per rule, with `m` the module oid and `r` the
//! rule label. `testIntegrity(p)` checks `p` hypothetically against the
//! integrity constraints; `defeated(r, p)` succeeds when a non-overridden
//! conflicting rule is applicable; `neg(blocked(...))` marks the rule
//! applicable so conflicting candidates can inspect each other without
//! recursing through `defeated`. Negative body literals `not(g)` become
//! `not(defeasible(g))`. Strict clauses pass through unchanged, and one
//! system bridge clause lets `defeasible(G)` fall back to strict derivation:
//!
//! ```text
//! defeasible([P|Args]) :- bound(P), derive([P|Args]).
//! ```

use crate::kb::{Clause, ClauseKind, ModuleId};
use crate::term::Term;
use std::sync::Arc;

/// Wraps a body literal for use inside the defeasible meta-program.
fn defeasible_body_literal(q: &Term) -> Term {
    if q.is_cut() {
        return q.clone();
    }
    let (negated, inner) = q.strip_not();
    let wrapped = Term::complex("defeasible", vec![inner.clone()]);
    if negated {
        Term::not(wrapped)
    } else {
        wrapped
    }
}

fn translate_clause(module: &ModuleId, clause: &Clause) -> Vec<Arc<Clause>> {
    let label = clause.label.expect("defeasible clauses are labeled before translation");
    let p = clause.head.clone();
    let def_p = Term::complex("defeasible", vec![p.clone()]);
    let test_p = Term::complex("testIntegrity", vec![p.clone()]);
    let wrapped: Vec<Term> = clause.body.iter().map(defeasible_body_literal).collect();

    let mut out = Vec::with_capacity(5);
    out.push(Arc::new(Clause::fact(Term::complex(
        "oid",
        vec![module.0.clone(), p.clone()],
    ))));
    out.push(Arc::new(Clause::fact(Term::complex(
        "oid",
        vec![Term::constant(label.as_str()), p.clone()],
    ))));

    let mut unblocked_body = vec![test_p.clone()];
    unblocked_body.extend(wrapped.iter().cloned());
    out.push(Arc::new(Clause::rule(
        Term::neg(Term::complex("blocked", vec![def_p.clone()])),
        unblocked_body,
    )));

    out.push(Arc::new(Clause::rule(
        Term::complex("body", vec![def_p.clone()]),
        wrapped.clone(),
    )));

    let mut main_body = vec![test_p];
    main_body.extend(wrapped);
    main_body.push(Term::not(Term::complex(
        "defeated",
        vec![Term::constant(label.as_str()), p.clone()],
    )));
    out.push(Arc::new(Clause::rule(def_p, main_body)));
    out
}

/// Produces the active clause list for a module: strict clauses unchanged,
/// defeasible clauses replaced by their meta-program.
pub fn translate_module(module: &ModuleId, source: &[Arc<Clause>]) -> Vec<Arc<Clause>> {
    let mut out = Vec::new();
    for clause in source {
        match clause.kind {
            ClauseKind::Strict => out.push(Arc::clone(clause)),
            ClauseKind::Defeasible => out.extend(translate_clause(module, clause)),
        }
    }
    out
}

pub const BRIDGE_MODULE: &str = "sys:defeasible";

/// The strict-fallback bridge, installed once per engine as a system module.
pub fn bridge_module() -> (ModuleId, Vec<Clause>) {
    let p = Term::var("P");
    let args = Term::var("Args");
    let pattern = Term::list_with_tail(vec![p.clone()], args);
    let clause = Clause::rule(
        Term::complex("defeasible", vec![pattern.clone()]),
        vec![
            Term::complex("bound", vec![p]),
            Term::complex("derive", vec![pattern]),
        ],
    );
    (ModuleId::named(BRIDGE_MODULE), vec![clause])
}

//! Untyped unification with optional occurs check.
//!
//! One extension beyond textbook unification: a list cell whose head position
//! is an unbound variable (or a constant equal to the functor) unifies with a
//! callable term through its `[functor|args]` decomposition. This is the
//! predicate-as-list convention used by the meta rules
//! `defeasible([P|Args]) :- bound(P), derive([P|Args])` and
//! `overrides([P|Args], neg([P|Args]))`, which must match ordinary literals.

use crate::term::{Subst, Term, Var};

/// Occurs check: does `var` occur in `term` under `s`?
pub fn occurs_in(var: &Var, term: &Term, s: &Subst) -> bool {
    let t = s.resolve(term);
    match t {
        Term::Var(v) => v.key() == var.key(),
        Term::Complex { args, .. } => args.iter().any(|a| occurs_in(var, a, s)),
        Term::Cons(h, tl) => occurs_in(var, h, s) || occurs_in(var, tl, s),
        _ => false,
    }
}

/// Extends `s` so that `a` and `b` become equal, or returns false leaving `s`
/// partially extended (callers checkpoint or discard on failure).
pub fn unify_in(a: &Term, b: &Term, s: &mut Subst, occurs_check: bool) -> bool {
    let ra = s.resolve(a).clone();
    let rb = s.resolve(b).clone();
    match (&ra, &rb) {
        (Term::Var(va), Term::Var(vb)) => {
            if va.key() != vb.key() {
                s.bind(va.key(), rb.clone());
            }
            true
        }
        (Term::Var(v), t) | (t, Term::Var(v)) => {
            if occurs_check && occurs_in(v, t, s) {
                return false;
            }
            s.bind(v.key(), (*t).clone());
            true
        }
        (Term::Const { name: na, .. }, Term::Const { name: nb, .. }) => na == nb,
        (Term::Num(x), Term::Num(y)) => x == y,
        (Term::Str(x), Term::Str(y)) => x == y,
        (Term::Nil, Term::Nil) => true,
        (Term::Cons(ha, ta), Term::Cons(hb, tb)) => {
            unify_in(ha, hb, s, occurs_check) && unify_in(ta, tb, s, occurs_check)
        }
        (
            Term::Complex { functor: fa, args: aa },
            Term::Complex { functor: fb, args: ab },
        ) => {
            if fa != fb || aa.len() != ab.len() {
                return false;
            }
            aa.iter().zip(ab).all(|(x, y)| unify_in(x, y, s, occurs_check))
        }
        (Term::Cons(h, _), atom @ (Term::Const { .. } | Term::Complex { .. }))
        | (atom @ (Term::Const { .. } | Term::Complex { .. }), Term::Cons(h, _)) => {
            let cons = if matches!(ra, Term::Cons(_, _)) { &ra } else { &rb };
            if !univ_head_matches(h, atom, s) {
                return false;
            }
            let listed = atom.univ_list().expect("callable term has univ view");
            unify_in(cons, &listed, s, occurs_check)
        }
        _ => false,
    }
}

fn univ_head_matches(head: &Term, atom: &Term, s: &Subst) -> bool {
    match s.resolve(head) {
        Term::Var(_) => true,
        Term::Const { name, .. } => Some(*name) == atom.functor_name(),
        _ => false,
    }
}

/// Most general unifier of `a` and `b` with the occurs check on.
pub fn unify(a: &Term, b: &Term) -> Option<Subst> {
    unify_with(a, b, true)
}

pub fn unify_with(a: &Term, b: &Term, occurs_check: bool) -> Option<Subst> {
    let mut s = Subst::new();
    if unify_in(a, b, &mut s, occurs_check) {
        Some(s)
    } else {
        None
    }
}

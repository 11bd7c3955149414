//! Reactive rule processing.
//!
//! An ECA rule is a fact or derived answer of the form
//! `eca(T, E, C, A, P, EL)`: time, event, condition, action, post-condition
//! and else-action, each a goal or the placeholder `_` (an unbound slot
//! reads as always-true). Shorter arities fill missing slots with `_`:
//! arity 2 is condition-action, 3 event-condition-action, 4 adds the
//! post-condition, 5 the time part.
//!
//! Evaluation is `T ∧ E ∧ ((C ∧ A ∧ P) ∨ EL)` left to right with bindings
//! flowing forward. The action runs per condition solution; knowledge
//! updates it makes are provisional until the post-condition succeeds and
//! are rolled back otherwise, after which the next condition or event
//! solution is tried. The else-action runs with time and event bindings
//! only, once everything else has failed. A failed time part disables the
//! rule outright: nothing later is evaluated at all.

use crate::kb::UpdateRecord;
use crate::solve::machine::{exists, first_solution, run_query};
use crate::solve::{Session, SolveError};
use crate::sym::Sym;
use crate::term::{Subst, Term};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct EcaRule {
    /// Stable identity, a hash of the canonicalized slot tuple. Also keys
    /// the rule's `interval/2` throttles.
    pub id: String,
    /// T, E, C, A, P, EL.
    pub slots: [Term; 6],
}

/// Solver invocations per slot; a short-circuited slot stays at zero.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct SlotCounters {
    pub t: u32,
    pub e: u32,
    pub c: u32,
    pub a: u32,
    pub p: u32,
    pub el: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    /// A condition-action-post branch committed.
    Fired,
    /// The else-action ran after every branch failed.
    ElseFired,
    NotApplicable,
    /// At least one action was undone by a failing post-condition and
    /// nothing fired afterwards.
    RolledBack,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Fired => write!(f, "fired"),
            Status::ElseFired => write!(f, "else-fired"),
            Status::NotApplicable => write!(f, "not-applicable"),
            Status::RolledBack => write!(f, "rolled-back"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RuleOutcome {
    pub rule: String,
    pub status: Status,
    /// The instantiated action (or else-action) of a fired outcome.
    pub detail: Option<String>,
    /// Branch failures from erroring slots, in evaluation order.
    pub errors: Vec<String>,
    pub counters: SlotCounters,
}

#[derive(Clone, Debug, Default)]
pub struct CycleReport {
    pub outcomes: Vec<RuleOutcome>,
    /// Malformed rules and commit conflicts, skipped but reported.
    pub diagnostics: Vec<String>,
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn is_placeholder(t: &Term) -> bool {
    match t {
        Term::Var(_) => true,
        Term::Const { name, .. } => name.as_str() == "_",
        _ => false,
    }
}

/// A slot must be callable (or a placeholder) to act as a goal.
fn slot_ok(t: &Term) -> bool {
    is_placeholder(t) || matches!(t, Term::Const { .. } | Term::Complex { .. })
}

fn pad(args: &[Term]) -> [Term; 6] {
    let ph = || Term::constant("_");
    let a = |i: usize| args[i].clone();
    match args.len() {
        2 => [ph(), ph(), a(0), a(1), ph(), ph()],
        3 => [ph(), a(0), a(1), a(2), ph(), ph()],
        4 => [ph(), a(0), a(1), a(2), a(3), ph()],
        5 => [a(0), a(1), a(2), a(3), a(4), ph()],
        _ => [a(0), a(1), a(2), a(3), a(4), a(5)],
    }
}

/// Flattens a conjunction slot into a goal list.
fn goals_of(t: &Term) -> Vec<Term> {
    match t {
        Term::Complex { functor, args } if functor.as_str() == "," => {
            args.iter().flat_map(goals_of).collect()
        }
        _ => vec![t.clone()],
    }
}

/// Queries the knowledge state for reaction rules of every accepted arity.
/// Rules are returned in (arity, answer) order; duplicates by slot tuple
/// collapse to one.
pub fn discover(session: &mut Session) -> (Vec<EcaRule>, Vec<String>) {
    let mut rules: Vec<EcaRule> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for arity in 2..=6 {
        let vars: Vec<Term> =
            (0..arity).map(|_| Term::Var(session.fresh_var("Slot"))).collect();
        let goal = Term::complex("eca", vars);
        let outcome = match run_query(session, &[goal]) {
            Ok(o) => o,
            Err(e) => {
                diagnostics.push(format!("eca/{} discovery failed: {}", arity, e));
                continue;
            }
        };
        for ans in &outcome.answers {
            let args = ans.goal.args();
            if let Some(bad) = args.iter().find(|s| !slot_ok(s)) {
                diagnostics.push(format!("rule {} skipped: {} is not a goal", ans.goal, bad));
                continue;
            }
            let slots = pad(args);
            let canonical = Term::complex("eca", slots.to_vec()).canonicalize().to_string();
            let id = format!("eca#{:016x}", fnv1a64(&canonical));
            if seen.insert(id.clone()) {
                rules.push(EcaRule { id, slots });
            }
        }
    }
    (rules, diagnostics)
}

fn merge(base: &Subst, extra: &Subst) -> Subst {
    let mut s = base.clone();
    for (k, t) in extra.iter() {
        s.bind(*k, t.clone());
    }
    s
}

fn solve_slot_all(
    session: &mut Session,
    slot: &Term,
    base: &Subst,
) -> Result<Vec<Subst>, SolveError> {
    let goals: Vec<Term> = goals_of(&base.apply(slot));
    Ok(run_query(session, &goals)?
        .answers
        .into_iter()
        .map(|a| merge(base, &a.subst))
        .collect())
}

fn solve_slot_first(
    session: &mut Session,
    slot: &Term,
    base: &Subst,
) -> Result<Option<Subst>, SolveError> {
    let goals: Vec<Term> = goals_of(&base.apply(slot));
    Ok(first_solution(session, &goals)?.map(|s| merge(base, &s)))
}

fn check_slot(session: &mut Session, slot: &Term, base: &Subst) -> Result<bool, SolveError> {
    let goals: Vec<Term> = goals_of(&base.apply(slot));
    exists(session, &goals)
}

/// Evaluates one rule against the session's current knowledge state.
pub fn evaluate(session: &mut Session, rule: &EcaRule) -> RuleOutcome {
    let mut counters = SlotCounters::default();
    let mut errors = Vec::new();
    let previous = session.current_rule.replace(Sym::new(&rule.id));
    let (status, detail) = run_rule(session, rule, &mut counters, &mut errors);
    session.current_rule = previous;
    RuleOutcome { rule: rule.id.clone(), status, detail, errors, counters }
}

fn run_rule(
    session: &mut Session,
    rule: &EcaRule,
    counters: &mut SlotCounters,
    errors: &mut Vec<String>,
) -> (Status, Option<String>) {
    let [t, e, c, a, p, el] = &rule.slots;

    let base = if is_placeholder(t) {
        Subst::new()
    } else {
        counters.t += 1;
        match solve_slot_first(session, t, &Subst::new()) {
            Ok(Some(s)) => s,
            Ok(None) => return (Status::NotApplicable, None),
            Err(err) => {
                errors.push(format!("time: {}", err));
                return (Status::NotApplicable, None);
            }
        }
    };

    let event_solutions = if is_placeholder(e) {
        vec![base.clone()]
    } else {
        counters.e += 1;
        match solve_slot_all(session, e, &base) {
            Ok(sols) => sols,
            Err(err) => {
                errors.push(format!("event: {}", err));
                Vec::new()
            }
        }
    };

    let mut rolled_back = false;
    for e_sub in &event_solutions {
        let condition_solutions = if is_placeholder(c) {
            vec![e_sub.clone()]
        } else {
            counters.c += 1;
            match solve_slot_all(session, c, e_sub) {
                Ok(sols) => sols,
                Err(err) => {
                    errors.push(format!("condition: {}", err));
                    continue;
                }
            }
        };
        for c_sub in &condition_solutions {
            let cp = session.checkpoint();
            let a_sub = if is_placeholder(a) {
                Some(c_sub.clone())
            } else {
                counters.a += 1;
                match solve_slot_first(session, a, c_sub) {
                    Ok(s) => s,
                    Err(err) => {
                        errors.push(format!("action: {}", err));
                        session.restore(cp);
                        continue;
                    }
                }
            };
            let Some(a_sub) = a_sub else {
                session.restore(cp);
                continue;
            };
            let post_ok = if is_placeholder(p) {
                true
            } else {
                counters.p += 1;
                match check_slot(session, p, &a_sub) {
                    Ok(ok) => ok,
                    Err(err) => {
                        errors.push(format!("post: {}", err));
                        false
                    }
                }
            };
            if post_ok {
                let detail = a_sub.apply(a).to_string();
                return (Status::Fired, Some(detail));
            }
            session.restore(cp);
            rolled_back = true;
        }
    }

    // Else branch: time and event bindings only. It runs both when the
    // event never happened and when no branch survived its post-condition.
    let fallthrough = if rolled_back { Status::RolledBack } else { Status::NotApplicable };
    if is_placeholder(el) {
        return (fallthrough, None);
    }
    let el_base = event_solutions.first().cloned().unwrap_or(base);
    counters.el += 1;
    let cp = session.checkpoint();
    match solve_slot_first(session, el, &el_base) {
        Ok(Some(s)) => (Status::ElseFired, Some(s.apply(el).to_string())),
        Ok(None) => {
            session.restore(cp);
            (fallthrough, None)
        }
        Err(err) => {
            errors.push(format!("else: {}", err));
            session.restore(cp);
            (fallthrough, None)
        }
    }
}

/// One daemon cycle: discover, evaluate every rule against the same
/// starting snapshot, then commit all knowledge deltas in rule order.
/// Updates made by one rule become visible to the others next cycle.
pub fn poll_cycle(session: &mut Session) -> CycleReport {
    let base_kb = session.kb.clone();
    let log_base = base_kb.log().len();

    let (rules, mut diagnostics) = discover(session);
    session.kb = base_kb.clone();

    let mut outcomes = Vec::new();
    let mut deltas: Vec<Vec<Arc<UpdateRecord>>> = Vec::new();
    for rule in &rules {
        session.kb = base_kb.clone();
        outcomes.push(evaluate(session, rule));
        deltas.push(session.kb.log()[log_base..].to_vec());
    }

    let mut committed = base_kb;
    for (rule, delta) in rules.iter().zip(deltas) {
        for rec in delta {
            match committed.apply(rec.op.clone()) {
                Ok(next) => committed = next,
                Err(e) => diagnostics.push(format!("commit for {}: {}", rule.id, e)),
            }
        }
    }
    session.kb = committed;
    CycleReport { outcomes, diagnostics }
}

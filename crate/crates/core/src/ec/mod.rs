//! Event calculus over the knowledge state.
//!
//! The axioms are ordinary clauses installed as the system module `sys:ec`,
//! so user programs can query `holdsAt/2`, `holdsInterval/2..3` and
//! `detect/2` directly and their own `happens`, `occurs`, `initiates` and
//! `terminates` definitions may be rules, not just facts. On top sit the
//! pieces that do not fit clause form: the `valueAt/3` builtin for
//! trajectories, the interval event algebra (`algebra`), the deontic
//! conflict rules and maximal-validity-interval reporting.
//!
//! Boundary convention: a fluent initiated at `t` holds at times strictly
//! greater than `t`; a terminating event at `t` stops it from holding
//! strictly after `t`, so at `t` itself the fluent still holds. `initially`
//! fluents hold from the timeline origin until first terminated. Fluents
//! declared `derived/1` bypass inertia entirely and hold only through user
//! `holdsAt` rules.

pub mod algebra;

use crate::kb::{KbError, KnowledgeState, ModuleId};
use crate::solve::machine::{exists, run_query};
use crate::solve::{
    datetime_to_seconds, eval_arith, solve_goal, truth_of, Session, SolveError, Truth,
};
use crate::term::{Subst, Term};
use crate::types::typed_unify_in;

pub const EC_MODULE: &str = "sys:ec";

/// The meta-program. `planned/2` records are stored but drive no axiom;
/// `occurs(E, [T1, T2])` acts at its completion time `T2`. The last two
/// clauses make a norm's declared deadline event terminate the norm and
/// raise a `violation(Norm)` event at the moment it fires, which
/// contrary-to-duty rules can pick up with ordinary `initiates` clauses.
///
/// In the inertia axioms the `initiates`/`terminates` literal runs before
/// `happensAt`, so the event variable is bound when event enumeration
/// starts. This keeps recursion through rule-derived events (the violation
/// clause in particular re-enters `holdsAt`) finite; the cost is that
/// `initiates`/`terminates` definitions must tolerate an unbound timestamp,
/// which facts and guard-style rules do.
const AXIOMS: &str = r#"
happensAt(E, T) :- happens(E, T).
happensAt(E, T2) :- occurs(E, [_T1, T2]).

holdsAt(F, T) :- initially(F), not(derived(F)), not(clippedFrom(F, T)).
holdsAt(F, T) :- initiates(E, F, T0), happensAt(E, T0), not(derived(F)),
                 less(T0, T), not(clipped(T0, F, T)).

clipped(T0, F, T2) :- terminates(E, F, T), happensAt(E, T),
                      moreequ(T, T0), less(T, T2).
clippedFrom(F, T2) :- terminates(E, F, T), happensAt(E, T), less(T, T2).

holdsInterval([E1, E2], [T1, T2]) :- holdsInterval([E1, E2], [T1, T2], []).
holdsInterval([E1, E2], [T1, T2], Terminators) :-
    happensAt(E1, T1), happensAt(E2, T2), lessequ(T1, T2),
    not(brokenInterval(T1, T2, Terminators)).
brokenInterval(T1, T2, Terminators) :-
    member(E, Terminators), happensAt(E, T), more(T, T1), less(T, T2).

detect(E, T) :- happensAt(E, T), not(consumed(E)).

holdsAt(permit(S, O, A), T) :- holdsAt(oblige(S, O, A), T).
holdsAt(waive(S, O, A), T) :- holdsAt(forbid(S, O, A), T).

happens(violation(N), T) :- normDeadline(N, E), happensAt(E, T), holdsAt(N, T).
terminates(E, N, T) :- normDeadline(N, E).
"#;

/// Installs the axioms; idempotent because adding a module replaces it.
pub fn install(st: KnowledgeState) -> Result<KnowledgeState, KbError> {
    let prog = crate::parse::parse_program(AXIOMS).expect("axioms parse");
    st.add_module(ModuleId::named(EC_MODULE), prog.clauses)
}

fn split_suffix(name: &str) -> Option<f64> {
    let digits = name.len() - name.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == name.len() {
        return None;
    }
    name[digits..].parse().ok()
}

/// Numeric key for a timepoint term, used where interval arithmetic needs
/// real numbers: seconds stay as is, datetimes convert to epoch seconds,
/// symbolic constants map to their numeric suffix or `timeOrder` rank.
pub fn timepoint_value(session: &mut Session, t: &Term) -> Option<f64> {
    match t {
        Term::Num(n) => Some(n.value()),
        Term::Complex { .. } => datetime_to_seconds(t).map(|s| s as f64),
        Term::Const { name, .. } => split_suffix(name.as_str())
            .or_else(|| session.time_order().get(name).map(|r| *r as f64)),
        _ => None,
    }
}

/// The `valueAt(Param, T, X)` builtin.
///
/// For every `trajectory(F, T1, Param, T2, Expr)` clause and every episode
/// of `F` (an initiating event at a numeric time, not yet clipped), the
/// parameter's value at time `t > start` is `Expr` with `T1 := start`,
/// `T2 := t`. With `T` bound the value is computed and unified with `X`;
/// with `T` free and `X` a number the linear expression is inverted to find
/// the time instead, which is how deadline rules fire. Calls re-entered for
/// a parameter already being measured return no answers, so events defined
/// in terms of a trajectory cannot circularly clip their own fluent.
pub fn value_at(
    session: &mut Session,
    subst: &Subst,
    args: &[Term],
) -> Result<Vec<Subst>, SolveError> {
    let p = subst.apply(&args[0]);
    if !p.is_ground() {
        return Err(SolveError::Builtin("valueAt: parameter must be bound".into()));
    }
    let canon = p.canonicalize();
    if session.trajectory_guard.contains(&canon) {
        return Ok(Vec::new());
    }
    session.trajectory_guard.push(canon);
    let out = value_at_inner(session, subst, &p, &args[1], &args[2]);
    session.trajectory_guard.pop();
    out
}

fn value_at_inner(
    session: &mut Session,
    subst: &Subst,
    p: &Term,
    t_arg: &Term,
    x_arg: &Term,
) -> Result<Vec<Subst>, SolveError> {
    let t_resolved = subst.resolve(t_arg).clone();
    let t_value = timepoint_value(session, &t_resolved);
    let x_value = eval_arith(x_arg, subst);
    if t_value.is_none() && x_value.is_none() {
        return Err(SolveError::Builtin(
            "valueAt: time or value must be bound".into(),
        ));
    }

    let fv = Term::Var(session.fresh_var("F"));
    let t1v = Term::Var(session.fresh_var("T1"));
    let t2v = Term::Var(session.fresh_var("T2"));
    let ev = Term::Var(session.fresh_var("Expr"));
    let traj_goal = Term::complex(
        "trajectory",
        vec![fv.clone(), t1v.clone(), p.clone(), t2v.clone(), ev.clone()],
    );
    let trajectories = run_query(session, &[traj_goal])?;

    let mut out = Vec::new();
    for traj in &trajectories.answers {
        let fluent = traj.subst.apply(&fv);
        let t1_slot = traj.subst.apply(&t1v);
        let t2_slot = traj.subst.apply(&t2v);
        let expr = traj.subst.apply(&ev);

        let e = Term::Var(session.fresh_var("E"));
        let ts = Term::Var(session.fresh_var("Ts"));
        let episode_goals = [
            Term::complex("initiates", vec![e.clone(), fluent.clone(), ts.clone()]),
            Term::complex("happensAt", vec![e.clone(), ts.clone()]),
        ];
        let episodes = run_query(session, &episode_goals)?;

        for ep in &episodes.answers {
            let start_term = ep.subst.apply(&ts);
            let Some(start) = timepoint_value(session, &start_term) else {
                continue;
            };
            let f_inst = ep.subst.apply(&fluent);

            // Fix the trajectory's own variables for this episode.
            let mut frame = Subst::new();
            match &t1_slot {
                Term::Var(v) => frame.bind(v.key(), Term::num(start)),
                other if eval_arith(other, &frame).map(|n| n.value()) == Some(start) => {}
                _ => continue,
            }
            let t2_key = match &t2_slot {
                Term::Var(v) => Some(v.key()),
                _ => None,
            };

            match t_value {
                Some(t) => {
                    if t <= start || clipped_at(session, start, &f_inst, t)? {
                        continue;
                    }
                    if let Some(k) = t2_key {
                        frame.bind(k, Term::num(t));
                    }
                    let v = eval_arith(&expr, &frame).ok_or_else(|| {
                        SolveError::Builtin(format!("valueAt: cannot evaluate {}", expr))
                    })?;
                    out.extend(unify_into(session, subst, x_arg, &Term::Num(v)));
                }
                None => {
                    let x = x_value.expect("checked above").value();
                    let Some(k) = t2_key else { continue };
                    let at = |frame: &mut Subst, t: f64| {
                        frame.bind(k, Term::num(t));
                        eval_arith(&expr, frame).map(|n| n.value())
                    };
                    let (Some(f0), Some(f1)) = (at(&mut frame, 0.0), at(&mut frame, 1.0))
                    else {
                        return Err(SolveError::Builtin(format!(
                            "valueAt: cannot evaluate {}",
                            expr
                        )));
                    };
                    let slope = f1 - f0;
                    if slope == 0.0 {
                        continue;
                    }
                    let t = (x - f0) / slope;
                    // Reject times before the episode, nonlinear mis-solves
                    // and episodes already clipped by then.
                    if !t.is_finite()
                        || t <= start
                        || at(&mut frame, t) != Some(x)
                        || clipped_at(session, start, &f_inst, t)?
                    {
                        continue;
                    }
                    out.extend(unify_into(session, subst, t_arg, &Term::num(t)));
                }
            }
        }
    }
    Ok(out)
}

fn clipped_at(
    session: &mut Session,
    start: f64,
    fluent: &Term,
    t: f64,
) -> Result<bool, SolveError> {
    let goal = Term::complex(
        "clipped",
        vec![Term::num(start), fluent.clone(), Term::num(t)],
    );
    exists(session, &[goal])
}

fn unify_into(session: &Session, subst: &Subst, a: &Term, b: &Term) -> Option<Subst> {
    let mut s = subst.clone();
    match typed_unify_in(&session.registry, a, b, &mut s, session.config.occurs_check) {
        Ok(true) => Some(s),
        _ => None,
    }
}

/// Truth of a deontic norm at a time, applying the conflict rule that a
/// prohibition beats a permission on the same (subject, object, action):
/// `permit` is only as true as `forbid` is false. Other norms (and
/// non-deontic fluents) report their plain `holdsAt` truth.
pub fn norm_holds(session: &mut Session, norm: &Term, t: &Term) -> Result<Truth, SolveError> {
    let truth = truth_of(session, &holds_at(norm, t))?;
    if let Term::Complex { functor, args } = norm {
        if functor.as_str() == "permit" && args.len() == 3 {
            let forbid = Term::complex("forbid", args.clone());
            let opposed = truth_of(session, &holds_at(&forbid, t))?;
            return Ok(truth.min(opposed.negate()));
        }
    }
    Ok(truth)
}

fn holds_at(f: &Term, t: &Term) -> Term {
    Term::complex("holdsAt", vec![f.clone(), t.clone()])
}

/// A (subject, object, action) triple both permitted and forbidden at the
/// same time.
#[derive(Clone, Debug, PartialEq)]
pub struct NormConflict {
    pub subject: Term,
    pub object: Term,
    pub action: Term,
}

/// All triples where `permit` and `forbid` are both derivable at `t`. On
/// such triples `norm_holds` sides with the prohibition.
pub fn check_norm_conflicts(
    session: &mut Session,
    t: &Term,
) -> Result<Vec<NormConflict>, SolveError> {
    let s = Term::Var(session.fresh_var("S"));
    let o = Term::Var(session.fresh_var("O"));
    let a = Term::Var(session.fresh_var("A"));
    let permit = Term::complex("permit", vec![s, o, a]);
    let outcome = solve_goal(session, &holds_at(&permit, t))?;

    let mut out: Vec<NormConflict> = Vec::new();
    for ans in outcome.answers.iter().filter(|a| a.truth == Truth::True) {
        let Term::Complex { args, .. } = &ans.goal else { continue };
        let Term::Complex { args: triple, .. } = &args[0] else { continue };
        let forbid = Term::complex("forbid", triple.clone());
        if truth_of(session, &holds_at(&forbid, t))? != Truth::True {
            continue;
        }
        let conflict = NormConflict {
            subject: triple[0].clone(),
            object: triple[1].clone(),
            action: triple[2].clone(),
        };
        if !out.contains(&conflict) {
            out.push(conflict);
        }
    }
    out.sort_by_key(|c| format!("{}|{}|{}", c.subject, c.object, c.action));
    Ok(out)
}

/// Maximal validity intervals of one ground fluent instance.
#[derive(Clone, Debug)]
pub struct FluentEpisodes {
    pub fluent: Term,
    /// Closed intervals in numeric time, earliest first.
    pub episodes: Vec<(f64, f64)>,
    pub total: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    // Order matters: an initiation and a termination at the same instant
    // yield a zero-length episode, never a negative or dangling one.
    Open,
    Close,
}

/// Sweeps the event history for every instance of `pattern` and reports its
/// maximal validity intervals inside `[origin, horizon]`. `initially`
/// instances open at the origin; episodes still open at the horizon close
/// there. Derived fluents have no inertia and are skipped.
pub fn validity_intervals(
    session: &mut Session,
    pattern: &Term,
    origin: f64,
    horizon: f64,
) -> Result<Vec<FluentEpisodes>, SolveError> {
    let mut edges: Vec<(String, Term, f64, Edge)> = Vec::new();
    let push = |session: &mut Session, f: &Term, t: f64, e: Edge, out: &mut Vec<_>| {
        if f.is_ground() && !matches!(exists(session, &[Term::complex("derived", vec![f.clone()])]), Ok(true)) {
            out.push((f.to_string(), f.clone(), t, e));
        }
    };

    let initially = Term::complex("initially", vec![pattern.clone()]);
    for ans in run_query(session, &[initially.clone()])?.answers {
        let f = ans.subst.apply(pattern);
        push(session, &f, origin, Edge::Open, &mut edges);
    }
    for (pred, edge) in [("initiates", Edge::Open), ("terminates", Edge::Close)] {
        let e = Term::Var(session.fresh_var("E"));
        let ts = Term::Var(session.fresh_var("T"));
        let goals = [
            Term::complex(pred, vec![e.clone(), pattern.clone(), ts.clone()]),
            Term::complex("happensAt", vec![e.clone(), ts.clone()]),
        ];
        for ans in run_query(session, &goals)?.answers {
            let f = ans.subst.apply(pattern);
            let Some(t) = timepoint_value(session, &ans.subst.apply(&ts)) else { continue };
            if t <= horizon {
                push(session, &f, t, edge, &mut edges);
            }
        }
    }

    edges.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.3.cmp(&b.3))
    });

    let mut out: Vec<FluentEpisodes> = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let key = edges[i].0.clone();
        let fluent = edges[i].1.clone();
        let mut episodes: Vec<(f64, f64)> = Vec::new();
        let mut open: Option<f64> = None;
        while i < edges.len() && edges[i].0 == key {
            let (_, _, t, edge) = &edges[i];
            match (edge, open) {
                (Edge::Open, None) => open = Some(*t),
                (Edge::Close, Some(start)) => {
                    episodes.push((start, *t));
                    open = None;
                }
                _ => {}
            }
            i += 1;
        }
        if let Some(start) = open {
            episodes.push((start, horizon));
        }
        let total = episodes.iter().map(|(s, e)| e - s).sum();
        out.push(FluentEpisodes { fluent, episodes, total });
    }
    Ok(out)
}

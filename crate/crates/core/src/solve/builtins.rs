//! Builtin predicates.
//!
//! Called by both solving procedures once a goal's functor and arity match
//! the catalog. A builtin receives the goal fully instantiated under the
//! current substitution and returns zero or more extended substitutions.
//! Effectful builtins (updates, notifications, consumption) act on the
//! session immediately; callers that need transactional behaviour bracket
//! them with session checkpoints.

use crate::integrity;
use crate::kb::{Clause, ModuleId};
use crate::parse;
use crate::solve::{
    compare_timepoints, datetime_to_seconds, eval_arith, machine, seconds_to_datetime,
    Session, SolveError,
};
use crate::sym::Sym;
use crate::term::{Subst, Term};
use crate::types::typed_unify_in;
use std::cmp::Ordering;

/// Names the two solving procedures dispatch on. `not` and conjunction are
/// handled inside the procedures themselves.
pub fn is_builtin(name: &str, arity: usize) -> bool {
    matches!(
        (name, arity),
        ("<" | ">" | "<=" | ">=" | "!=" | "=" , 2)
            | ("less" | "more" | "lessequ" | "moreequ", 2)
            | ("bound" | "free", 1)
            | ("member", 2)
            | ("derive" | "solve" | "eval", 1)
            | ("sysTime", 1)
            | ("interval", 2)
            | ("notify", 2)
            | ("consume", 1)
            | ("update", 1..=4)
            | ("remove", 1)
            | ("transaction", 1)
            | ("testIntegrity", 0 | 1)
            | ("defeated", 2)
            | ("valueAt", 3)
            | ("noop", 0 | 1)
            | ("Webservice.ping", 1)
            | ("rbsla.utils.WebService.load", 2)
    )
}

/// Dispatches a goal to its builtin. `Ok(None)` means the goal is an
/// ordinary predicate to resolve against clauses.
pub fn try_call(
    session: &mut Session,
    goal: &Term,
    subst: &Subst,
) -> Result<Option<Vec<Subst>>, SolveError> {
    let (name, args): (Sym, &[Term]) = match goal {
        Term::Complex { functor, args } => (*functor, args),
        Term::Const { name, .. } => (*name, &[]),
        _ => return Ok(None),
    };
    if let Some(custom) = session.custom_builtin(name, args.len()) {
        return custom(session, args, subst).map(Some);
    }
    if !is_builtin(name.as_str(), args.len()) {
        return Ok(None);
    }
    let r = match (name.as_str(), args.len()) {
        ("<", _) | ("less", _) => compare(session, subst, args, &[Ordering::Less]),
        (">", _) | ("more", _) => compare(session, subst, args, &[Ordering::Greater]),
        ("<=", _) | ("lessequ", _) => {
            compare(session, subst, args, &[Ordering::Less, Ordering::Equal])
        }
        (">=", _) | ("moreequ", _) => {
            compare(session, subst, args, &[Ordering::Greater, Ordering::Equal])
        }
        ("!=", _) => not_equal(session, subst, args),
        ("=", _) => equals(session, subst, args),
        ("bound", _) => Ok(test(!args[0].is_var(), subst)),
        ("free", _) => Ok(test(args[0].is_var(), subst)),
        ("member", _) => member(session, subst, args),
        ("derive", 1) | ("solve", 1) => enumerate(session, subst, &args[0]),
        ("eval", 1) => {
            let goal = as_goal(&args[0]);
            Ok(test(machine::exists(session, &goal)?, subst))
        }
        ("sysTime", 1) => {
            let now = seconds_to_datetime(session.clock.now());
            Ok(unify_extend(session, subst, &args[0], &now))
        }
        ("interval", 2) => interval(session, subst, args),
        ("notify", 2) => {
            let at = session.clock.now();
            session.outbox.push(crate::env::Notification {
                at,
                recipient: args[0].clone(),
                message: args[1].clone(),
            });
            Ok(vec![subst.clone()])
        }
        ("consume", 1) => {
            append_fact(
                session,
                ModuleId::named("sys:consumed"),
                Term::complex("consumed", vec![args[0].clone()]),
            )?;
            Ok(vec![subst.clone()])
        }
        ("update", n) => update(session, subst, args, n),
        ("remove", 1) => {
            session.kb = session.kb.remove_module(&ModuleId(args[0].clone()))?;
            Ok(vec![subst.clone()])
        }
        ("transaction", 1) => transaction(session, subst, &args[0]),
        ("testIntegrity", 0) => Ok(test(integrity::global_ok(session)?, subst)),
        ("testIntegrity", 1) => Ok(test(integrity::hypothetical_ok(session, &args[0])?, subst)),
        ("defeated", 2) => Ok(test(integrity::defeated(session, &args[1])?, subst)),
        ("valueAt", 3) => crate::ec::value_at(session, subst, args),
        ("noop", _) => Ok(vec![subst.clone()]),
        ("Webservice.ping", 1) => {
            let up = match &args[0] {
                Term::Const { name, .. } => session.env.ping(*name),
                Term::Str(s) => session.env.ping(Sym::new(s)),
                _ => false,
            };
            Ok(test(up, subst))
        }
        ("rbsla.utils.WebService.load", 2) => {
            let url = match &args[0] {
                Term::Str(s) => s.to_string(),
                Term::Const { name, .. } => name.as_str().to_string(),
                _ => return Ok(Some(Vec::new())),
            };
            let response = session.env.load(&url).unwrap_or_else(|| Term::constant("service"));
            Ok(unify_extend(session, subst, &args[1], &response))
        }
        _ => unreachable!("catalog and dispatch agree"),
    }?;
    Ok(Some(r))
}

fn test(ok: bool, subst: &Subst) -> Vec<Subst> {
    if ok {
        vec![subst.clone()]
    } else {
        Vec::new()
    }
}

fn unify_extend(session: &Session, subst: &Subst, a: &Term, b: &Term) -> Vec<Subst> {
    let mut s = subst.clone();
    match typed_unify_in(&session.registry, a, b, &mut s, session.config.occurs_check) {
        Ok(true) => vec![s],
        _ => Vec::new(),
    }
}

/// Normalizes a term for comparison: ground arithmetic collapses to a
/// number, everything else stays as is.
fn normalize(t: &Term, s: &Subst) -> Term {
    eval_arith(t, s).map(Term::Num).unwrap_or_else(|| t.clone())
}

fn compare(
    session: &mut Session,
    subst: &Subst,
    args: &[Term],
    accept: &[Ordering],
) -> Result<Vec<Subst>, SolveError> {
    let a = normalize(&args[0], subst);
    let b = normalize(&args[1], subst);
    if a.is_var() || b.is_var() {
        return Err(SolveError::Builtin(format!(
            "comparison on unbound argument: {} vs {}",
            a, b
        )));
    }
    let ord = compare_timepoints(session, &a, &b)?;
    Ok(test(accept.contains(&ord), subst))
}

fn not_equal(
    _session: &mut Session,
    subst: &Subst,
    args: &[Term],
) -> Result<Vec<Subst>, SolveError> {
    let a = normalize(&args[0], subst);
    let b = normalize(&args[1], subst);
    if !a.is_ground() || !b.is_ground() {
        return Err(SolveError::Builtin(format!(
            "inequality on unbound argument: {} vs {}",
            a, b
        )));
    }
    Ok(test(a != b, subst))
}

fn equals(session: &mut Session, subst: &Subst, args: &[Term]) -> Result<Vec<Subst>, SolveError> {
    let a = normalize(&args[0], subst);
    let b = normalize(&args[1], subst);
    Ok(unify_extend(session, subst, &a, &b))
}

fn member(session: &mut Session, subst: &Subst, args: &[Term]) -> Result<Vec<Subst>, SolveError> {
    let mut out = Vec::new();
    let mut cursor = args[1].clone();
    loop {
        match cursor {
            Term::Cons(h, t) => {
                let mut s = subst.clone();
                if typed_unify_in(&session.registry, &args[0], &h, &mut s, session.config.occurs_check)? {
                    out.push(s);
                }
                cursor = *t;
            }
            _ => break,
        }
    }
    Ok(out)
}

/// A goal argument: either a literal or a `[Pred|Args]` list view of one.
fn as_goal(arg: &Term) -> Vec<Term> {
    if matches!(arg, Term::Cons(_, _)) {
        if let Some(t) = Term::from_univ_list(arg) {
            return vec![t];
        }
    }
    vec![arg.clone()]
}

/// Enumerating meta-call: answers extend the caller's substitution.
fn enumerate(session: &mut Session, subst: &Subst, arg: &Term) -> Result<Vec<Subst>, SolveError> {
    let goal = as_goal(arg);
    let outcome = machine::run_query(session, &goal)?;
    let mut out = Vec::new();
    for a in outcome.answers {
        let mut s = subst.clone();
        for (key, val) in a.subst.iter() {
            s.bind(*key, val.clone());
        }
        out.push(s);
    }
    Ok(out)
}

fn span_seconds(t: &Term, subst: &Subst) -> Option<i64> {
    match t {
        Term::Complex { functor, args } if functor.as_str() == "timespan" && args.len() == 4 => {
            let mut parts = [0i64; 4];
            for (i, a) in args.iter().enumerate() {
                parts[i] = eval_arith(a, subst)?.as_int()?;
            }
            Some(parts[0] * 86_400 + parts[1] * 3_600 + parts[2] * 60 + parts[3])
        }
        Term::Num(n) => n.as_int(),
        _ => None,
    }
}

/// Rate limiter: true when at least the span has passed since this rule
/// last let it through. First evaluation fires immediately.
fn interval(session: &mut Session, subst: &Subst, args: &[Term]) -> Result<Vec<Subst>, SolveError> {
    let span = span_seconds(&args[0], subst)
        .ok_or_else(|| SolveError::Builtin(format!("bad timespan {}", args[0])))?;
    let now = match &args[1] {
        t if datetime_to_seconds(t).is_some() => datetime_to_seconds(t).unwrap(),
        Term::Num(n) => n.as_int().unwrap_or(session.clock.now()),
        _ => session.clock.now(),
    };
    let rule = session.current_rule.unwrap_or_else(|| Sym::new("global"));
    let key = (rule, args[0].to_string());
    let fire = match session.throttle_last(&key) {
        Some(last) => now - last >= span,
        None => true,
    };
    if fire {
        session.throttle_fire(key, now);
    }
    Ok(test(fire, subst))
}

fn append_fact(session: &mut Session, id: ModuleId, fact: Term) -> Result<(), SolveError> {
    let mut clauses: Vec<Clause> = session
        .kb
        .module(&id)
        .map(|m| m.source.iter().map(|c| (**c).clone()).collect())
        .unwrap_or_default();
    clauses.push(Clause::fact(fact));
    session.kb = session.kb.add_module(id, clauses)?;
    Ok(())
}

fn fill_placeholders(t: &Term, args: &[Term]) -> Result<Term, SolveError> {
    match t {
        Term::Placeholder(i) => {
            args.get(*i as usize).cloned().ok_or(SolveError::Placeholder(*i))
        }
        Term::Complex { functor, args: inner } => Ok(Term::Complex {
            functor: *functor,
            args: inner
                .iter()
                .map(|a| fill_placeholders(a, args))
                .collect::<Result<_, _>>()?,
        }),
        Term::Cons(h, tl) => Ok(Term::Cons(
            Box::new(fill_placeholders(h, args)?),
            Box::new(fill_placeholders(tl, args)?),
        )),
        other => Ok(other.clone()),
    }
}

/// `update(File)`, `update(Oid, Text)`, `update(Oid, Text, Args)` and
/// `update(Oid, Text, Args, Conditions)`. Text parses as clause syntax;
/// `_N` placeholders take the N-th element of `Args`; `Conditions` is a
/// list of extra body literals appended to every parsed clause.
fn update(
    session: &mut Session,
    subst: &Subst,
    args: &[Term],
    arity: usize,
) -> Result<Vec<Subst>, SolveError> {
    if arity == 1 {
        let path = match &args[0] {
            Term::Str(s) => s.to_string(),
            Term::Const { name, .. } => name.as_str().to_string(),
            other => return Err(SolveError::Builtin(format!("bad update source {}", other))),
        };
        let text = std::fs::read_to_string(&path).map_err(|e| SolveError::Io(e.to_string()))?;
        let prog = parse::parse_program_typed(&text, &session.registry)?;
        session.kb = session.kb.add_module(ModuleId::path(&path), prog.clauses)?;
        return Ok(vec![subst.clone()]);
    }

    let text = match &args[1] {
        Term::Str(s) => s.to_string(),
        other => return Err(SolveError::Builtin(format!("update text must be a string, got {}", other))),
    };
    let mut clauses = parse::parse_clauses(&text)?;
    if arity >= 3 {
        let fill: Vec<Term> = args[2].as_list().ok_or_else(|| {
            SolveError::Builtin(format!("update arguments must be a list, got {}", args[2]))
        })?;
        for c in &mut clauses {
            c.head = fill_placeholders(&c.head, &fill)?;
            c.body = c
                .body
                .iter()
                .map(|b| fill_placeholders(b, &fill))
                .collect::<Result<_, _>>()?;
        }
    }
    if arity == 4 {
        let extra: Vec<Term> = args[3].as_list().ok_or_else(|| {
            SolveError::Builtin(format!("update conditions must be a list, got {}", args[3]))
        })?;
        for c in &mut clauses {
            c.body.extend(extra.iter().cloned());
        }
    }
    session.kb = session.kb.add_module(ModuleId(args[0].clone()), clauses)?;
    Ok(vec![subst.clone()])
}

/// Runs a goal of updates as a unit: if the goal fails or the resulting
/// state violates integrity, every effect is rolled back and the
/// transaction fails.
fn transaction(
    session: &mut Session,
    subst: &Subst,
    goal: &Term,
) -> Result<Vec<Subst>, SolveError> {
    let cp = session.checkpoint();
    let ok = match machine::exists(session, &as_goal(goal)) {
        Ok(ok) => ok,
        Err(e) => {
            session.restore(cp);
            return Err(e);
        }
    };
    if !ok {
        session.restore(cp);
        return Ok(Vec::new());
    }
    if !integrity::global_ok(session)? {
        session.restore(cp);
        return Ok(Vec::new());
    }
    Ok(vec![subst.clone()])
}

//! Interval-based event algebra.
//!
//! Complex events are detected over the recorded history: an atomic event
//! is detected at each `detect/2` solution (a point interval), and the
//! operators combine operand detections into wider intervals. Bindings flow
//! left to right through operands, so `sequence(request(C), approve(C))`
//! detects only matching pairs. Times are normalized to numbers via
//! `timepoint_value`; records whose time cannot be normalized are ignored.
//!
//! A sequence requires its operands in order, with no event from the
//! sequence's own alphabet (any atomic event occurring in it) strictly
//! inside a gap between consecutive operands. This is the chained
//! `holdsInterval` reading with the operand list as terminators; adjacent
//! operands may touch, so equal endpoint times are allowed.

use crate::solve::machine::run_query;
use crate::solve::{Session, SolveError};
use crate::term::{Subst, Term, Var};

#[derive(Clone, Debug)]
pub enum EventExpr {
    /// An atomic event or action pattern; may contain variables.
    Atom(Term),
    Sequence(Vec<EventExpr>),
    Or(Vec<EventExpr>),
    /// Exactly one operand detected anywhere in the history.
    Xor(Vec<EventExpr>),
    /// All operands detected in any order; detection is the envelope.
    And(Vec<EventExpr>),
    /// All operands detected on the identical interval.
    Concurrent(Vec<EventExpr>),
    /// A window `[E1, E2]` with no terminator event strictly inside it.
    Neg { terminators: Vec<Term>, window: Box<(EventExpr, EventExpr)> },
    /// The n-th occurrence (by completion time) finishes the detection.
    Any(usize, Box<EventExpr>),
    /// Each occurrence of the operand strictly inside a `[E1, E2]` window.
    Aperiodic { expr: Box<EventExpr>, window: Box<(EventExpr, EventExpr)> },
}

impl EventExpr {
    /// Parses the functional notation used in scripts: `sequence(a, b, c)`,
    /// `neg([t1], [a, b])`, `any(3, ping_fail)`, `aperiodic(e, [a, b])`.
    /// Unrecognized terms are atomic events.
    pub fn from_term(t: &Term) -> Result<EventExpr, SolveError> {
        let bad = |msg: String| SolveError::Builtin(msg);
        let Term::Complex { functor, args } = t else {
            return Ok(EventExpr::Atom(t.clone()));
        };
        let sub = |args: &[Term]| -> Result<Vec<EventExpr>, SolveError> {
            args.iter().map(EventExpr::from_term).collect()
        };
        let pair = |t: &Term| -> Result<Box<(EventExpr, EventExpr)>, SolveError> {
            match t.as_list().as_deref() {
                Some([a, b]) => Ok(Box::new((EventExpr::from_term(a)?, EventExpr::from_term(b)?))),
                _ => Err(bad(format!("event algebra: {} is not a window pair", t))),
            }
        };
        Ok(match (functor.as_str(), args.len()) {
            ("sequence", n) if n >= 1 => EventExpr::Sequence(sub(args)?),
            ("or", n) if n >= 1 => EventExpr::Or(sub(args)?),
            ("xor", n) if n >= 1 => EventExpr::Xor(sub(args)?),
            ("and", n) if n >= 1 => EventExpr::And(sub(args)?),
            ("concurrent", n) if n >= 1 => EventExpr::Concurrent(sub(args)?),
            ("neg", 2) => {
                let terminators = args[0]
                    .as_list()
                    .ok_or_else(|| bad(format!("event algebra: {} is not a terminator list", args[0])))?;
                EventExpr::Neg { terminators, window: pair(&args[1])? }
            }
            ("any", 2) => {
                let n = match &args[0] {
                    Term::Num(v) if v.as_int().map(|i| i >= 1).unwrap_or(false) => {
                        v.as_int().unwrap() as usize
                    }
                    _ => return Err(bad(format!("event algebra: any needs a count, got {}", args[0]))),
                };
                EventExpr::Any(n, Box::new(EventExpr::from_term(&args[1])?))
            }
            ("aperiodic", 2) => EventExpr::Aperiodic {
                expr: Box::new(EventExpr::from_term(&args[0])?),
                window: pair(&args[1])?,
            },
            _ => EventExpr::Atom(t.clone()),
        })
    }

    /// Every atomic event pattern in the expression, window events included,
    /// terminator lists excluded (those name outside events).
    pub fn alphabet(&self, out: &mut Vec<Term>) {
        match self {
            EventExpr::Atom(t) => {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
            EventExpr::Sequence(es)
            | EventExpr::Or(es)
            | EventExpr::Xor(es)
            | EventExpr::And(es)
            | EventExpr::Concurrent(es) => es.iter().for_each(|e| e.alphabet(out)),
            EventExpr::Neg { window, .. } | EventExpr::Aperiodic { window, .. } => {
                window.0.alphabet(out);
                window.1.alphabet(out);
                if let EventExpr::Aperiodic { expr, .. } = self {
                    expr.alphabet(out);
                }
            }
            EventExpr::Any(_, e) => e.alphabet(out),
        }
    }

    fn vars(&self) -> Vec<Var> {
        let mut atoms = Vec::new();
        self.alphabet(&mut atoms);
        if let EventExpr::Neg { terminators, .. } = self {
            atoms.extend(terminators.iter().cloned());
        }
        let mut vars = Vec::new();
        for a in &atoms {
            a.collect_vars(&mut vars);
        }
        vars
    }
}

/// One detected occurrence of a complex event.
#[derive(Clone, Debug)]
pub struct Detection {
    pub start: f64,
    pub end: f64,
    /// Bindings for the expression's variables in this occurrence.
    pub subst: Subst,
}

/// Detects every occurrence of `expr` over the history recorded in the
/// session's knowledge state, sorted by interval.
pub fn detect_complex(session: &mut Session, expr: &EventExpr) -> Result<Vec<Detection>, SolveError> {
    let vars = expr.vars();
    let mut out = detections(session, expr, &Subst::new())?;
    for d in &mut out {
        d.subst = d.subst.project(&vars);
    }
    out.sort_by(|a, b| {
        (a.start, a.end)
            .partial_cmp(&(b.start, b.end))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.subst.to_string().cmp(&b.subst.to_string()))
    });
    out.dedup_by(|a, b| a.start == b.start && a.end == b.end && a.subst == b.subst);
    Ok(out)
}

fn detections(
    session: &mut Session,
    expr: &EventExpr,
    acc: &Subst,
) -> Result<Vec<Detection>, SolveError> {
    match expr {
        EventExpr::Atom(t) => {
            let inst = acc.apply(t);
            let tv = Term::Var(session.fresh_var("T"));
            let goal = Term::complex("detect", vec![inst, tv.clone()]);
            let mut out = Vec::new();
            for ans in run_query(session, &[goal])?.answers {
                let Some(v) = timepoint(session, &ans.subst.apply(&tv)) else { continue };
                out.push(Detection { start: v, end: v, subst: merged(acc, &ans.subst) });
            }
            Ok(out)
        }
        EventExpr::Sequence(es) => {
            let mut alphabet = Vec::new();
            expr.alphabet(&mut alphabet);
            let mut chains: Vec<Detection> = Vec::new();
            for (i, e) in es.iter().enumerate() {
                if i == 0 {
                    chains = detections(session, e, acc)?;
                    continue;
                }
                let mut next = Vec::new();
                for c in &chains {
                    for d in detections(session, e, &c.subst)? {
                        if d.start < c.end
                            || interrupted(session, &alphabet, &d.subst, c.end, d.start)?
                        {
                            continue;
                        }
                        next.push(Detection { start: c.start, end: d.end, subst: d.subst });
                    }
                }
                chains = next;
            }
            Ok(chains)
        }
        EventExpr::Or(es) => {
            let mut out = Vec::new();
            for e in es {
                out.extend(detections(session, e, acc)?);
            }
            Ok(out)
        }
        EventExpr::Xor(es) => {
            let mut found: Vec<Vec<Detection>> = Vec::new();
            for e in es {
                let ds = detections(session, e, acc)?;
                if !ds.is_empty() {
                    found.push(ds);
                }
            }
            Ok(if found.len() == 1 { found.pop().unwrap() } else { Vec::new() })
        }
        EventExpr::And(es) => {
            let mut partial =
                vec![Detection { start: f64::INFINITY, end: f64::NEG_INFINITY, subst: acc.clone() }];
            for e in es {
                let mut next = Vec::new();
                for p in &partial {
                    for d in detections(session, e, &p.subst)? {
                        next.push(Detection {
                            start: p.start.min(d.start),
                            end: p.end.max(d.end),
                            subst: d.subst,
                        });
                    }
                }
                partial = next;
            }
            Ok(partial)
        }
        EventExpr::Concurrent(es) => {
            let mut partial: Vec<(Option<(f64, f64)>, Subst)> = vec![(None, acc.clone())];
            for e in es {
                let mut next = Vec::new();
                for (iv, s) in &partial {
                    for d in detections(session, e, s)? {
                        match iv {
                            None => next.push((Some((d.start, d.end)), d.subst)),
                            Some(iv) if *iv == (d.start, d.end) => {
                                next.push((Some(*iv), d.subst));
                            }
                            _ => {}
                        }
                    }
                }
                partial = next;
            }
            Ok(partial
                .into_iter()
                .filter_map(|(iv, s)| iv.map(|(a, b)| Detection { start: a, end: b, subst: s }))
                .collect())
        }
        EventExpr::Neg { terminators, window } => {
            let mut out = Vec::new();
            for open in detections(session, &window.0, acc)? {
                for close in detections(session, &window.1, &open.subst)? {
                    if close.start < open.end
                        || interrupted(session, terminators, &close.subst, open.start, close.end)?
                    {
                        continue;
                    }
                    out.push(Detection { start: open.start, end: close.end, subst: close.subst });
                }
            }
            Ok(out)
        }
        EventExpr::Any(n, e) => {
            let mut ds = detections(session, e, acc)?;
            ds.sort_by(|a, b| {
                (a.end, a.start)
                    .partial_cmp(&(b.end, b.start))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            Ok(ds.into_iter().nth(n - 1).into_iter().collect())
        }
        EventExpr::Aperiodic { expr, window } => {
            let mut out = Vec::new();
            for open in detections(session, &window.0, acc)? {
                for close in detections(session, &window.1, &open.subst)? {
                    if close.start < open.end {
                        continue;
                    }
                    for d in detections(session, expr, &close.subst)? {
                        if d.start > open.start && d.end < close.end {
                            out.push(d);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// True when any of `events`, instantiated under `subst`, happens strictly
/// inside `(from, to)`.
fn interrupted(
    session: &mut Session,
    events: &[Term],
    subst: &Subst,
    from: f64,
    to: f64,
) -> Result<bool, SolveError> {
    if to - from <= 0.0 {
        return Ok(false);
    }
    for ev in events {
        let inst = subst.apply(ev);
        let tv = Term::Var(session.fresh_var("T"));
        let goal = Term::complex("happensAt", vec![inst, tv.clone()]);
        for ans in run_query(session, &[goal])?.answers {
            if let Some(v) = timepoint(session, &ans.subst.apply(&tv)) {
                if v > from && v < to {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

fn timepoint(session: &mut Session, t: &Term) -> Option<f64> {
    super::timepoint_value(session, t)
}

fn merged(acc: &Subst, extra: &Subst) -> Subst {
    let mut s = acc.clone();
    for (k, t) in extra.iter() {
        s.bind(*k, t.clone());
    }
    s
}

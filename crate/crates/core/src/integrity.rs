//! Integrity constraints and the defeat relation between defeasible rules.
//!
//! Constraints are `integrity(...)` clauses; conditional constraints are
//! rules with an `integrity(...)` head. Four connectives over member
//! literals:
//!
//! * `not(m1, ..)`: no member may be derivable.
//! * `xor(m1, ..)`: members are mutually exclusive; two co-derivable members
//!   under a common grounding violate it.
//! * `or(m1, ..)`: at least one member must be derivable.
//! * `and(m1, ..)`: every member must be derivable.
//!
//! Members can also be given as a single list argument. On top of the
//! declared constraints every predicate carries an implicit consistency
//! constraint `xor(p(..), neg(p(..)))`.
//!
//! Constraint checking always runs on the SLDNF machine: constraints are
//! operational tests against the current state, and their guards (`not`,
//! comparisons, update guards) assume Prolog evaluation order.

use crate::solve::{machine, Session, SolveError};
use crate::sym::Sym;
use crate::term::{PredKey, Subst, Term};
use crate::unify::unify_in;
use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Clone, Debug)]
pub struct PriorityGraphIssue {
    pub cycle: Vec<String>,
}

impl fmt::Display for PriorityGraphIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "priority cycle: {}", self.cycle.join(" -> "))
    }
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub constraint: Term,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integrity violation in {}: {}", self.constraint, self.detail)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Not,
    Xor,
    Or,
    And,
}

/// Splits a constraint term into its connective and member literals.
fn members(c: &Term) -> Option<(Kind, Vec<Term>)> {
    let (functor, args) = match c {
        Term::Complex { functor, args } => (functor.as_str(), args),
        _ => return None,
    };
    let kind = match functor {
        "not" => Kind::Not,
        "xor" => Kind::Xor,
        "or" => Kind::Or,
        "and" => Kind::And,
        _ => return None,
    };
    let items = if args.len() == 1 {
        args[0].as_list().unwrap_or_else(|| vec![args[0].clone()])
    } else {
        args.clone()
    };
    Some((kind, items))
}

/// Enumerates the instantiated constraint terms currently in force.
fn active_constraints(session: &mut Session) -> Result<Vec<Term>, SolveError> {
    let key = PredKey { negated: false, functor: Sym::new("integrity"), arity: 1 };
    if !session.has_clauses(&key) {
        return Ok(Vec::new());
    }
    let goal = Term::complex("integrity", vec![Term::var("Constraint")]);
    let outcome = machine::run_query(session, std::slice::from_ref(&goal))?;
    Ok(outcome
        .answers
        .into_iter()
        .filter_map(|a| match a.goal {
            Term::Complex { args, .. } => args.into_iter().next(),
            _ => None,
        })
        .collect())
}

fn check_constraint(session: &mut Session, c: &Term) -> Result<Option<Violation>, SolveError> {
    let Some((kind, items)) = members(c) else {
        return Ok(Some(Violation {
            constraint: c.clone(),
            detail: "unknown constraint form".into(),
        }));
    };
    match kind {
        Kind::Not => {
            for m in &items {
                if machine::exists(session, std::slice::from_ref(m))? {
                    return Ok(Some(Violation {
                        constraint: c.clone(),
                        detail: format!("{} is derivable", m),
                    }));
                }
            }
        }
        Kind::Xor => {
            for i in 0..items.len() {
                for j in i + 1..items.len() {
                    let pair = [items[i].clone(), items[j].clone()];
                    if machine::exists(session, &pair)? {
                        return Ok(Some(Violation {
                            constraint: c.clone(),
                            detail: format!("{} and {} hold together", items[i], items[j]),
                        }));
                    }
                }
            }
        }
        Kind::Or => {
            let mut any = false;
            for m in &items {
                if machine::exists(session, std::slice::from_ref(m))? {
                    any = true;
                    break;
                }
            }
            if !any {
                return Ok(Some(Violation {
                    constraint: c.clone(),
                    detail: "no member is derivable".into(),
                }));
            }
        }
        Kind::And => {
            for m in &items {
                if !machine::exists(session, std::slice::from_ref(m))? {
                    return Ok(Some(Violation {
                        constraint: c.clone(),
                        detail: format!("{} is not derivable", m),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Predicates that have explicitly negated clauses (in the knowledge state
/// or the hypothesis overlay) and so need the implicit consistency check.
fn negated_preds(session: &Session) -> Vec<PredKey> {
    let mut keys: HashSet<PredKey> = session
        .kb
        .predicates()
        .filter(|k| k.negated)
        .cloned()
        .collect();
    for c in &session.overlay {
        if let Some(k) = c.head.pred_key() {
            if k.negated {
                keys.insert(k);
            }
        }
    }
    keys.into_iter().collect()
}

fn fresh_atom(session: &mut Session, key: &PredKey) -> Term {
    let args: Vec<Term> = (0..key.arity).map(|i| Term::Var(session.fresh_var(&format!("A{}", i)))).collect();
    if key.arity == 0 {
        Term::Const { name: key.functor, ty: None }
    } else {
        Term::Complex { functor: key.functor, args }
    }
}

/// All current integrity violations, including implicit consistency.
pub fn violations(session: &mut Session) -> Result<Vec<Violation>, SolveError> {
    let mut out = Vec::new();
    for c in active_constraints(session)? {
        if let Some(v) = check_constraint(session, &c)? {
            out.push(v);
        }
    }
    for key in negated_preds(session) {
        let atom = fresh_atom(session, &key);
        let pair = [atom.clone(), Term::neg(atom.clone())];
        if machine::exists(session, &pair)? {
            out.push(Violation {
                constraint: Term::complex("xor", vec![atom.clone(), Term::neg(atom)]),
                detail: "a literal and its explicit negation both hold".into(),
            });
        }
    }
    Ok(out)
}

pub fn global_ok(session: &mut Session) -> Result<bool, SolveError> {
    Ok(violations(session)?.is_empty())
}

/// Tests a literal hypothetically: would the constraints survive if `lit`
/// were a fact? Used as the applicability guard of defeasible rules.
pub fn hypothetical_ok(session: &mut Session, lit: &Term) -> Result<bool, SolveError> {
    // Fast path: nothing can conflict with `lit` when there are no declared
    // constraints and the opposite literal space is empty.
    let ic_key = PredKey { negated: false, functor: Sym::new("integrity"), arity: 1 };
    if !session.has_clauses(&ic_key) {
        if let Some(mut opposite) = lit.pred_key() {
            opposite.negated = !opposite.negated;
            if !session.has_clauses(&opposite) {
                return Ok(true);
            }
        }
    }
    session.overlay.push(std::sync::Arc::new(crate::kb::Clause::fact(lit.clone())));
    let ok = global_ok(session);
    session.overlay.pop();
    ok
}

/// Conflicting literals for `p`: its explicit negation plus, for every
/// exclusion constraint with a member matching `p`, the other members under
/// that match's bindings.
fn opposers(session: &mut Session, p: &Term) -> Result<Vec<Term>, SolveError> {
    let mut out = Vec::new();
    let (negated, inner) = p.strip_neg();
    out.push(if negated { inner.clone() } else { Term::neg(p.clone()) });
    for c in active_constraints(session)? {
        let Some((kind, items)) = members(&c) else { continue };
        if !matches!(kind, Kind::Xor | Kind::Not) || items.len() < 2 {
            continue;
        }
        // One shared renaming per constraint keeps variables linking the
        // members intact, so matching one member instantiates the others.
        let offset = session.fresh_offset();
        let items: Vec<Term> = items.iter().map(|t| t.rename(offset)).collect();
        for i in 0..items.len() {
            let mut s = Subst::new();
            if unify_in(&items[i], p, &mut s, session.config.occurs_check) {
                for (j, other) in items.iter().enumerate() {
                    if j != i {
                        out.push(s.apply(other));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A rule is defeated when some conflicting rule is applicable and not
/// overridden. Applicability of the opposer is its translated
/// `neg(blocked(defeasible(O)))` guard; override evidence is either a
/// priority between rule or module identifiers (`oid` pairs joined through
/// `overrides/2`) or a direct head-level `overrides(p, O)` statement.
/// Without priorities two conflicting applicable rules defeat each other,
/// which is the skeptical reading.
pub fn defeated(session: &mut Session, p: &Term) -> Result<bool, SolveError> {
    for opposer in opposers(session, p)? {
        let guard = Term::neg(Term::complex(
            "blocked",
            vec![Term::complex("defeasible", vec![opposer.clone()])],
        ));
        if !machine::exists(session, std::slice::from_ref(&guard))? {
            continue;
        }
        let i1 = Term::Var(session.fresh_var("I1"));
        let i2 = Term::Var(session.fresh_var("I2"));
        let by_id = [
            Term::complex("oid", vec![i1.clone(), p.clone()]),
            Term::complex("oid", vec![i2.clone(), opposer.clone()]),
            Term::complex("overrides", vec![i1, i2]),
        ];
        let direct = Term::complex("overrides", vec![p.clone(), opposer.clone()]);
        let overridden = machine::exists(session, &by_id)?
            || machine::exists(session, std::slice::from_ref(&direct))?;
        if !overridden {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Cycles in the rule priority graph make every rule on the cycle defeat
/// the others, which is almost always an authoring mistake; `check` reports
/// them.
pub fn priority_cycles(session: &Session) -> Vec<PriorityGraphIssue> {
    let key = PredKey { negated: false, functor: Sym::new("overrides"), arity: 2 };
    let mut edges: HashMap<Term, Vec<Term>> = HashMap::new();
    for cr in session.kb.clauses_for(&key, None) {
        if !cr.clause.is_fact() {
            continue;
        }
        let args = cr.clause.head.args();
        if args[0].is_ground() && args[1].is_ground() {
            edges.entry(args[0].clone()).or_default().push(args[1].clone());
        }
    }
    let mut issues = Vec::new();
    let mut visiting: Vec<Term> = Vec::new();
    let mut done: HashSet<Term> = HashSet::new();

    fn dfs(
        node: &Term,
        edges: &HashMap<Term, Vec<Term>>,
        visiting: &mut Vec<Term>,
        done: &mut HashSet<Term>,
        issues: &mut Vec<PriorityGraphIssue>,
    ) {
        if done.contains(node) {
            return;
        }
        if let Some(start) = visiting.iter().position(|n| n == node) {
            let cycle: Vec<String> = visiting[start..].iter().map(|t| t.to_string()).collect();
            issues.push(PriorityGraphIssue { cycle });
            return;
        }
        visiting.push(node.clone());
        for next in edges.get(node).into_iter().flatten() {
            dfs(next, edges, visiting, done, issues);
        }
        visiting.pop();
        done.insert(node.clone());
    }

    let nodes: Vec<Term> = edges.keys().cloned().collect();
    for n in nodes {
        dfs(&n, &edges, &mut visiting, &mut done, &mut issues);
    }
    issues
}

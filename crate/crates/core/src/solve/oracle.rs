//! Reference model computation for ground programs.
//!
//! Computes the complete well-founded model of a ground normal program by
//! the textbook alternating fixpoint: `Γ(S)` is the least model of the
//! program reduced by assuming `S` true for negative literals, the true set
//! is the least fixpoint of `Γ∘Γ`, and everything outside `Γ` of that set is
//! false. No goal direction, no tables, no builtins: this is the slow,
//! obviously-correct yardstick the memoizing solver is checked against.

use crate::kb::Clause;
use crate::solve::Truth;
use crate::term::Term;
use std::collections::{HashMap, HashSet};

struct GroundRule {
    head: Term,
    pos: Vec<Term>,
    neg: Vec<Term>,
}

fn ground_rules(clauses: &[Clause]) -> Option<Vec<GroundRule>> {
    let mut rules = Vec::new();
    for c in clauses {
        if !c.head.is_ground() {
            return None;
        }
        let mut rule = GroundRule { head: c.head.clone(), pos: Vec::new(), neg: Vec::new() };
        let mut alive = true;
        for b in &c.body {
            if *b == Term::constant("true") {
                continue;
            }
            if *b == Term::constant("fail") || *b == Term::constant("false") {
                alive = false;
                break;
            }
            let (is_not, inner) = b.strip_not();
            if !inner.is_ground() {
                return None;
            }
            if is_not {
                rule.neg.push(inner.clone());
            } else {
                rule.pos.push(inner.clone());
            }
        }
        if alive {
            rules.push(rule);
        }
    }
    Some(rules)
}

/// The well-founded model of a ground program as a truth assignment over its
/// Herbrand base. Returns `None` if the program is not ground.
pub fn well_founded_model(clauses: &[Clause]) -> Option<HashMap<Term, Truth>> {
    let rules = ground_rules(clauses)?;
    let mut base: HashSet<Term> = HashSet::new();
    for r in &rules {
        base.insert(r.head.clone());
        base.extend(r.pos.iter().cloned());
        base.extend(r.neg.iter().cloned());
    }

    let gamma = |assumed_true: &HashSet<Term>| -> HashSet<Term> {
        let mut derived: HashSet<Term> = HashSet::new();
        loop {
            let mut changed = false;
            for r in &rules {
                if derived.contains(&r.head) {
                    continue;
                }
                if r.pos.iter().all(|p| derived.contains(p))
                    && r.neg.iter().all(|n| !assumed_true.contains(n))
                {
                    derived.insert(r.head.clone());
                    changed = true;
                }
            }
            if !changed {
                return derived;
            }
        }
    };

    let mut true_set: HashSet<Term> = HashSet::new();
    let not_false = loop {
        let overestimate = gamma(&true_set);
        let next = gamma(&overestimate);
        if next == true_set {
            break overestimate;
        }
        true_set = next;
    };

    let mut model = HashMap::new();
    for atom in base {
        let truth = if true_set.contains(&atom) {
            Truth::True
        } else if not_false.contains(&atom) {
            Truth::Unknown
        } else {
            Truth::False
        };
        model.insert(atom, truth);
    }
    Some(model)
}

/// Truth of an atom in a model; atoms outside the base are false.
pub fn model_truth(model: &HashMap<Term, Truth>, atom: &Term) -> Truth {
    model.get(atom).copied().unwrap_or(Truth::False)
}

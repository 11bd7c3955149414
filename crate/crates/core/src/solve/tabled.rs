//! Memoizing well-founded solver.
//!
//! Goal-directed evaluation with variant tabling: each subgoal (canonicalized
//! up to variable names) is solved once per query and its answers, tagged
//! `True` or `Unknown`, are reused everywhere else. Loop handling follows the
//! call stack: re-encountering a subgoal already on the stack contributes no
//! answers (positive loop) or an `Unknown` floor (loop through negation) and
//! marks the outermost frame of the strongly connected cluster. When that
//! frame finishes, the provisional results are discarded and the cluster is
//! recomputed exactly by an alternating fixpoint over the ground subprogram
//! reachable from it, with already-completed tables as the boundary. The
//! fixpoint is the standard one: the true set grows as `Γ(Γ(.))` of the
//! positive reduct, atoms outside the final overestimate are false, the gap
//! is unknown.
//!
//! Cuts are treated as `true` here: answer tables are unordered, so clause
//! commit has no meaning. Scripts relying on cut run under SLDNF.
//!
//! If a cluster instantiates to something non-ground the exact completion is
//! not available; the solver keeps the provisional answers and latches the
//! resource flag so the outcome reports `Unknown` rather than guessing.

use crate::solve::{builtins, Session, SolveError, Truth};
use crate::solve::{build_outcome, Outcome};
use crate::term::{Subst, Term};
use crate::types::typed_unify_in;
use std::collections::{HashMap, HashSet};

#[derive(Clone, Debug)]
struct Table {
    answers: Vec<(Term, Truth)>,
    complete: bool,
}

struct Frame {
    neg_level: usize,
    needs_completion: bool,
}

pub struct TabledRun {
    tables: HashMap<Term, Table>,
    stack: Vec<Frame>,
    on_stack: HashMap<Term, usize>,
}

const NO_DEP: usize = usize::MAX;

impl TabledRun {
    pub fn new() -> TabledRun {
        TabledRun { tables: HashMap::new(), stack: Vec::new(), on_stack: HashMap::new() }
    }

    /// Solves one subgoal. Returns its answers and the lowest stack index it
    /// depends on (`NO_DEP` when independent of the current call stack).
    fn call(
        &mut self,
        session: &mut Session,
        goal: &Term,
        neg_level: usize,
    ) -> Result<(Vec<(Term, Truth)>, usize), SolveError> {
        let key = goal.canonicalize();
        if let Some(t) = self.tables.get(&key) {
            if t.complete {
                return Ok((t.answers.clone(), NO_DEP));
            }
        }
        if let Some(&idx) = self.on_stack.get(&key) {
            self.stack[idx].needs_completion = true;
            if neg_level != self.stack[idx].neg_level {
                // Loop through negation: floor at unknown until completion.
                return Ok((vec![(goal.clone(), Truth::Unknown)], idx));
            }
            let provisional =
                self.tables.get(&key).map(|t| t.answers.clone()).unwrap_or_default();
            return Ok((provisional, idx));
        }

        let idx = self.stack.len();
        self.stack.push(Frame { neg_level, needs_completion: false });
        self.on_stack.insert(key.clone(), idx);

        let mut dep_min = NO_DEP;
        let mut answers: Vec<(Term, Truth)> = Vec::new();
        let mut answer_index: HashMap<Term, usize> = HashMap::new();

        let pred = goal.pred_key().ok_or(SolveError::UnboundGoal)?;
        let batch = session.clauses(&pred);
        let mut ci = 0;
        while let Some(clause) = batch.get(ci).cloned() {
            ci += 1;
            if !session.tick() {
                break;
            }
            let renamed = clause.rename_apart(session.fresh_offset());
            let mut s = Subst::new();
            if !typed_unify_in(
                &session.registry,
                goal,
                &renamed.head,
                &mut s,
                session.config.occurs_check,
            )? {
                continue;
            }
            let mut emit = |s_final: &Subst, truth: Truth| {
                let instance = s_final.apply(goal);
                let canon = instance.canonicalize();
                match answer_index.get(&canon) {
                    Some(&i) => {
                        if truth > answers[i].1 {
                            answers[i].1 = truth;
                        }
                    }
                    None => {
                        answer_index.insert(canon, answers.len());
                        answers.push((instance, truth));
                    }
                }
            };
            self.eval_body(
                session,
                &renamed.body,
                0,
                s,
                Truth::True,
                neg_level,
                &mut dep_min,
                &mut emit,
            )?;
        }

        self.on_stack.remove(&key);
        let frame = self.stack.pop().expect("frame pushed above");

        if session.bounded() {
            // Partial evaluation: keep provisional, never mark complete.
            self.tables.insert(key, Table { answers: answers.clone(), complete: false });
            return Ok((answers, dep_min.min(NO_DEP)));
        }

        if dep_min >= idx {
            if frame.needs_completion {
                if self.complete_cluster(session, goal)? {
                    let t = self.tables.get(&key).expect("completed");
                    return Ok((t.answers.clone(), NO_DEP));
                }
                // Non-ground cluster: provisional stays, outcome flagged.
                session.mark_bounded();
                self.tables.insert(key, Table { answers: answers.clone(), complete: false });
                return Ok((answers, NO_DEP));
            }
            self.tables.insert(key, Table { answers: answers.clone(), complete: true });
            Ok((answers, NO_DEP))
        } else {
            self.stack[dep_min].needs_completion = true;
            self.tables.insert(key, Table { answers: answers.clone(), complete: false });
            Ok((answers, dep_min))
        }
    }

    /// Depth-first product over a clause body with three-valued conjunction:
    /// the body's truth is the minimum of its literals', and evaluation
    /// continues past unknowns so later literals can still fail the branch.
    #[allow(clippy::too_many_arguments)]
    fn eval_body(
        &mut self,
        session: &mut Session,
        lits: &[Term],
        at: usize,
        s: Subst,
        truth: Truth,
        neg_level: usize,
        dep_min: &mut usize,
        emit: &mut dyn FnMut(&Subst, Truth),
    ) -> Result<(), SolveError> {
        if at == lits.len() {
            emit(&s, truth);
            return Ok(());
        }
        let lit = s.apply(&lits[at]);

        if lit.is_cut() {
            return self.eval_body(session, lits, at + 1, s, truth, neg_level, dep_min, emit);
        }
        if let Term::Const { name, .. } = &lit {
            match name.as_str() {
                "true" => {
                    return self.eval_body(session, lits, at + 1, s, truth, neg_level, dep_min, emit)
                }
                "fail" | "false" => return Ok(()),
                _ => {}
            }
        }
        if let Term::Complex { functor, args } = &lit {
            match functor.as_str() {
                "," => {
                    let mut expanded = args.clone();
                    expanded.extend_from_slice(&lits[at + 1..]);
                    return self.eval_body(
                        session, &expanded, 0, s, truth, neg_level, dep_min, emit,
                    );
                }
                "not" => {
                    let mut collected: Vec<(Subst, Truth)> = Vec::new();
                    {
                        let mut collect = |s2: &Subst, t2: Truth| collected.push((s2.clone(), t2));
                        self.eval_body(
                            session,
                            args,
                            0,
                            s.clone(),
                            Truth::True,
                            neg_level + 1,
                            dep_min,
                            &mut collect,
                        )?;
                    }
                    let inner = collected
                        .iter()
                        .map(|(_, t)| *t)
                        .max()
                        .unwrap_or(Truth::False);
                    return match inner.negate() {
                        Truth::False => Ok(()),
                        v => self.eval_body(
                            session,
                            lits,
                            at + 1,
                            s,
                            truth.min(v),
                            neg_level,
                            dep_min,
                            emit,
                        ),
                    };
                }
                _ => {}
            }
        }

        if let Some(alternatives) = builtins::try_call(session, &lit, &s)? {
            for s2 in alternatives {
                self.eval_body(session, lits, at + 1, s2, truth, neg_level, dep_min, emit)?;
            }
            return Ok(());
        }

        let (answers, dep) = self.call(session, &lit, neg_level)?;
        *dep_min = (*dep_min).min(dep);
        for (term, tr) in answers {
            let fresh = term.rename(session.fresh_offset());
            let mut s2 = s.clone();
            if typed_unify_in(
                &session.registry,
                &lit,
                &fresh,
                &mut s2,
                session.config.occurs_check,
            )? {
                self.eval_body(
                    session,
                    lits,
                    at + 1,
                    s2,
                    truth.min(tr),
                    neg_level,
                    dep_min,
                    emit,
                )?;
            }
        }
        Ok(())
    }

    /// Exact recomputation of a loop cluster: collects the ground subprogram
    /// reachable from `root` (stopping at completed tables), runs the
    /// alternating fixpoint, and writes completed tables for every atom in
    /// the closure. Returns false when the closure is not ground.
    fn complete_cluster(
        &mut self,
        session: &mut Session,
        root: &Term,
    ) -> Result<bool, SolveError> {
        #[derive(Clone)]
        struct GroundRule {
            head: Term,
            pos: Vec<Term>,
            neg: Vec<Term>,
        }

        if !root.is_ground() {
            return Ok(false);
        }

        let mut atoms: Vec<Term> = Vec::new();
        let mut seen: HashSet<Term> = HashSet::new();
        let mut rules: Vec<GroundRule> = Vec::new();
        let mut queue = vec![root.clone()];

        while let Some(atom) = queue.pop() {
            if !seen.insert(atom.clone()) {
                continue;
            }
            if let Some(t) = self.tables.get(&atom.canonicalize()) {
                if t.complete {
                    continue; // boundary
                }
            }
            atoms.push(atom.clone());
            let Some(pred) = atom.pred_key() else { return Ok(false) };
            let batch = session.clauses(&pred);
            let mut ci = 0;
            while let Some(clause) = batch.get(ci).cloned() {
                ci += 1;
                if !session.tick() {
                    return Ok(false);
                }
                let renamed = clause.rename_apart(session.fresh_offset());
                let mut s = Subst::new();
                if !typed_unify_in(
                    &session.registry,
                    &atom,
                    &renamed.head,
                    &mut s,
                    session.config.occurs_check,
                )? {
                    continue;
                }
                let mut rule = GroundRule { head: atom.clone(), pos: Vec::new(), neg: Vec::new() };
                let mut alive = true;
                for b in &renamed.body {
                    let lit = s.apply(b);
                    if lit.is_cut() || lit == Term::constant("true") {
                        continue;
                    }
                    if lit == Term::constant("fail") || lit == Term::constant("false") {
                        alive = false;
                        break;
                    }
                    let (is_not, inner) = lit.strip_not();
                    let inner = inner.clone();
                    if !inner.is_ground() {
                        return Ok(false);
                    }
                    let is_builtin_lit = match &inner {
                        Term::Complex { functor, args } => {
                            builtins::is_builtin(functor.as_str(), args.len())
                                || session.custom_builtin(*functor, args.len()).is_some()
                        }
                        Term::Const { name, .. } => builtins::is_builtin(name.as_str(), 0),
                        _ => false,
                    };
                    if is_builtin_lit {
                        // Builtins have fixed truth here; fold them away.
                        let holds = match builtins::try_call(session, &inner, &s)? {
                            Some(alts) => !alts.is_empty(),
                            None => false,
                        };
                        let effective = if is_not { !holds } else { holds };
                        if !effective {
                            alive = false;
                            break;
                        }
                        continue;
                    }
                    if is_not {
                        rule.neg.push(inner.clone());
                        queue.push(inner);
                    } else {
                        rule.pos.push(inner.clone());
                        queue.push(inner);
                    }
                }
                if alive {
                    rules.push(rule);
                }
            }
        }

        let boundary: HashMap<Term, Truth> = {
            let mut b = HashMap::new();
            for rule in &rules {
                for lit in rule.pos.iter().chain(rule.neg.iter()) {
                    if seen.contains(lit) && !atoms.contains(lit) {
                        let truth = self
                            .tables
                            .get(&lit.canonicalize())
                            .map(|t| {
                                t.answers
                                    .iter()
                                    .map(|(_, tr)| *tr)
                                    .max()
                                    .unwrap_or(Truth::False)
                            })
                            .unwrap_or(Truth::False);
                        b.insert(lit.clone(), truth);
                    }
                }
            }
            b
        };

        let in_cluster: HashSet<&Term> = atoms.iter().collect();
        let gamma = |assumed_true: &HashSet<Term>, optimistic: bool| -> HashSet<Term> {
            let mut derived: HashSet<Term> = HashSet::new();
            loop {
                let mut changed = false;
                'rules: for rule in &rules {
                    if derived.contains(&rule.head) {
                        continue;
                    }
                    for p in &rule.pos {
                        if in_cluster.contains(p) {
                            if !derived.contains(p) {
                                continue 'rules;
                            }
                        } else {
                            match boundary.get(p).copied().unwrap_or(Truth::False) {
                                Truth::True => {}
                                Truth::Unknown if optimistic => {}
                                _ => continue 'rules,
                            }
                        }
                    }
                    for n in &rule.neg {
                        if in_cluster.contains(n) {
                            if assumed_true.contains(n) {
                                continue 'rules;
                            }
                        } else {
                            match boundary.get(n).copied().unwrap_or(Truth::False) {
                                Truth::False => {}
                                Truth::Unknown if optimistic => {}
                                _ => continue 'rules,
                            }
                        }
                    }
                    derived.insert(rule.head.clone());
                    changed = true;
                }
                if !changed {
                    return derived;
                }
            }
        };

        let mut true_set: HashSet<Term> = HashSet::new();
        let not_false = loop {
            let overestimate = gamma(&true_set, true);
            let next = gamma(&overestimate, false);
            if next == true_set {
                break overestimate;
            }
            true_set = next;
        };

        for atom in &atoms {
            let truth = if true_set.contains(atom) {
                Truth::True
            } else if not_false.contains(atom) {
                Truth::Unknown
            } else {
                Truth::False
            };
            let answers = match truth {
                Truth::False => Vec::new(),
                t => vec![(atom.clone(), t)],
            };
            self.tables
                .insert(atom.canonicalize(), Table { answers, complete: true });
        }
        Ok(true)
    }
}

/// All answers to a conjunction in the well-founded model.
pub fn run_query(session: &mut Session, goals: &[Term]) -> Result<Outcome, SolveError> {
    let mut run = TabledRun::new();
    let mut results: Vec<(Subst, Truth)> = Vec::new();
    let mut dep = NO_DEP;
    let r = {
        let mut emit = |s: &Subst, t: Truth| results.push((s.clone(), t));
        run.eval_body(
            session,
            goals,
            0,
            Subst::new(),
            Truth::True,
            0,
            &mut dep,
            &mut emit,
        )
    };
    session.memo_entries = session.memo_entries.max(run.tables.len());
    r?;
    let mut outcome = build_outcome(goals, results);
    outcome.answers.retain(|a| a.truth != Truth::False);
    if let Some(max) = session.config.max_answers {
        outcome.answers.truncate(max);
    }
    Ok(outcome)
}

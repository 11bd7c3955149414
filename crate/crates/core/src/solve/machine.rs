//! Iterative SLDNF machine.
//!
//! Explicit goal stack and choice-point stack instead of host recursion, so
//! derivation depth is bounded by memory, not the thread stack. Bindings are
//! applied eagerly to one current substitution; each choice point snapshots
//! the continuation and substitution it needs to resume. `not(G)` runs a
//! nested machine as an existence test; a cut prunes choice points back to
//! the level recorded when its clause was entered.

use crate::kb::Clause;
use crate::solve::{builtins, ClauseBatch, Outcome, Session, SolveError, Truth};
use crate::term::{Subst, Term};
use crate::types::typed_unify_in;
use std::sync::Arc;

#[derive(Clone, Debug)]
struct Frame {
    goal: Term,
    /// Choice-point level to cut back to.
    barrier: usize,
    depth: usize,
}

enum Alts {
    /// Cursor over the candidate clauses for a user predicate.
    Clauses { goal: Term, batch: ClauseBatch, next: usize, depth: usize },
    /// Remaining alternative substitutions from a builtin.
    Substs { remaining: Vec<Subst> },
}

struct Choice {
    goals: Vec<Frame>,
    subst: Subst,
    alts: Alts,
}

enum Step {
    Continue,
    Backtrack,
    Done,
}

pub struct Machine {
    goals: Vec<Frame>,
    subst: Subst,
    cps: Vec<Choice>,
    answers: Vec<Subst>,
    max_answers: usize,
}

impl Machine {
    pub fn new(goals: &[Term], max_answers: usize) -> Machine {
        let frames = goals
            .iter()
            .rev()
            .map(|g| Frame { goal: g.clone(), barrier: 0, depth: 0 })
            .collect();
        Machine {
            goals: frames,
            subst: Subst::new(),
            cps: Vec::new(),
            answers: Vec::new(),
            max_answers,
        }
    }

    pub fn run(&mut self, session: &mut Session) -> Result<(), SolveError> {
        loop {
            if !session.tick() {
                return Ok(());
            }
            match self.step(session)? {
                Step::Continue => {}
                Step::Backtrack => {
                    if !self.advance(session)? {
                        return Ok(());
                    }
                }
                Step::Done => return Ok(()),
            }
        }
    }

    fn step(&mut self, session: &mut Session) -> Result<Step, SolveError> {
        let frame = match self.goals.pop() {
            None => {
                self.answers.push(self.subst.clone());
                return Ok(if self.answers.len() >= self.max_answers {
                    Step::Done
                } else {
                    Step::Backtrack
                });
            }
            Some(f) => f,
        };
        let goal = self.subst.apply(&frame.goal);

        if goal.is_cut() {
            self.cps.truncate(frame.barrier);
            return Ok(Step::Continue);
        }
        match &goal {
            Term::Var(_) => return Err(SolveError::UnboundGoal),
            Term::Const { name, .. } => match name.as_str() {
                "true" => return Ok(Step::Continue),
                "fail" | "false" => return Ok(Step::Backtrack),
                _ => {}
            },
            Term::Complex { functor, args } => match functor.as_str() {
                "," => {
                    for a in args.iter().rev() {
                        self.goals.push(Frame {
                            goal: a.clone(),
                            barrier: frame.barrier,
                            depth: frame.depth,
                        });
                    }
                    return Ok(Step::Continue);
                }
                "not" => {
                    // Existence test: not(G) succeeds when no instance of G
                    // is derivable. A resource-bounded sub-search cannot
                    // justify success, so it fails with the bound latched.
                    let was = session.take_bounded();
                    let found = exists(session, args)?;
                    let sub_bounded = session.take_bounded();
                    if was || sub_bounded {
                        session.mark_bounded();
                    }
                    return Ok(if found || sub_bounded {
                        Step::Backtrack
                    } else {
                        Step::Continue
                    });
                }
                _ => {}
            },
            _ => {}
        }

        if let Some(result) = builtins::try_call(session, &goal, &self.subst)? {
            let mut alternatives = result;
            if alternatives.is_empty() {
                return Ok(Step::Backtrack);
            }
            alternatives.reverse();
            let first = alternatives.pop().expect("nonempty");
            if !alternatives.is_empty() {
                self.cps.push(Choice {
                    goals: self.goals.clone(),
                    subst: self.subst.clone(),
                    alts: Alts::Substs { remaining: alternatives },
                });
            }
            self.subst = first;
            return Ok(Step::Continue);
        }

        let key = goal.pred_key().ok_or(SolveError::UnboundGoal)?;
        if let Some(max) = session.config.max_depth {
            if frame.depth >= max {
                session.mark_bounded();
                return Ok(Step::Backtrack);
            }
        }
        let batch = session.clauses(&key);
        if batch.is_empty() {
            return Ok(Step::Backtrack);
        }
        self.cps.push(Choice {
            goals: self.goals.clone(),
            subst: self.subst.clone(),
            alts: Alts::Clauses { goal, batch, next: 0, depth: frame.depth },
        });
        Ok(Step::Backtrack)
    }

    /// Resumes the most recent choice point with an untried alternative.
    /// Returns false when the search space is exhausted.
    fn advance(&mut self, session: &mut Session) -> Result<bool, SolveError> {
        enum Next {
            Subst(Subst),
            Clause(Arc<Clause>),
            Exhausted,
        }
        loop {
            let Some(idx) = self.cps.len().checked_sub(1) else {
                return Ok(false);
            };
            let next = match &mut self.cps[idx].alts {
                Alts::Substs { remaining } => {
                    remaining.pop().map(Next::Subst).unwrap_or(Next::Exhausted)
                }
                Alts::Clauses { batch, next, .. } => match batch.get(*next) {
                    Some(c) => {
                        *next += 1;
                        Next::Clause(Arc::clone(c))
                    }
                    None => Next::Exhausted,
                },
            };
            match next {
                Next::Exhausted => {
                    self.cps.pop();
                }
                Next::Subst(s) => {
                    self.goals = self.cps[idx].goals.clone();
                    self.subst = s;
                    return Ok(true);
                }
                Next::Clause(clause) => {
                    if !session.tick() {
                        return Ok(false);
                    }
                    let renamed = clause.rename_apart(session.fresh_offset());
                    let (goal, depth) = match &self.cps[idx].alts {
                        Alts::Clauses { goal, depth, .. } => (goal.clone(), *depth),
                        _ => unreachable!(),
                    };
                    let mut s = self.cps[idx].subst.clone();
                    let matched = typed_unify_in(
                        &session.registry,
                        &goal,
                        &renamed.head,
                        &mut s,
                        session.config.occurs_check,
                    )?;
                    if matched {
                        self.goals = self.cps[idx].goals.clone();
                        self.subst = s;
                        for b in renamed.body.iter().rev() {
                            self.goals.push(Frame {
                                goal: b.clone(),
                                barrier: idx,
                                depth: depth + 1,
                            });
                        }
                        return Ok(true);
                    }
                }
            }
        }
    }
}

/// All answers to a conjunction under SLDNF.
pub fn run_query(session: &mut Session, goals: &[Term]) -> Result<Outcome, SolveError> {
    let max = session.config.max_answers.unwrap_or(usize::MAX);
    let mut machine = Machine::new(goals, max);
    machine.run(session)?;
    let results = machine.answers.into_iter().map(|s| (s, Truth::True)).collect();
    Ok(crate::solve::build_outcome(goals, results))
}

/// Existence test used for negation as failure and guard conditions.
pub fn exists(session: &mut Session, goals: &[Term]) -> Result<bool, SolveError> {
    let mut machine = Machine::new(goals, 1);
    machine.run(session)?;
    Ok(!machine.answers.is_empty())
}

/// First solution of a conjunction, with its substitution. Used where a
/// caller commits to one branch but needs the bindings it produced.
pub fn first_solution(session: &mut Session, goals: &[Term]) -> Result<Option<Subst>, SolveError> {
    let mut machine = Machine::new(goals, 1);
    machine.run(session)?;
    Ok(machine.answers.into_iter().next())
}

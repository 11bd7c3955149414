//! Query answering.
//!
//! Two interchangeable procedures over the same knowledge state:
//!
//! * `Semantics::Sldnf`: iterative SLD resolution with negation as failure,
//!   Prolog clause order and cut. Linear in derivation size, no memoization.
//! * `Semantics::Wfs`: memoizing solver computing the well-founded model
//!   restricted to the atoms relevant to the query. Repeated subgoals are
//!   answered from tables and loops through negation come out `Unknown`
//!   instead of failing to terminate.
//!
//! A `Session` carries everything mutable around a query: the current
//! knowledge state, clock, simulated environment, notification outbox,
//! resource budgets and the hypothetical-fact overlay used by integrity
//! tests. Knowledge states themselves stay immutable; update builtins swap
//! the session's state for a new one, and checkpoints make those effects
//! transactional.

pub mod builtins;
pub mod machine;
pub mod oracle;
pub mod tabled;

use crate::env::{Notification, SimEnvironment, VirtualClock};
use crate::kb::{Clause, ClauseRef, KbError, KnowledgeState, ModuleId};
use crate::parse::ParseError;
use crate::sym::Sym;
use crate::term::{Num, PredKey, Subst, Term, Var};
use crate::types::{TypeError, TypeRegistry};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Semantics {
    #[default]
    Sldnf,
    Wfs,
}

/// Three-valued truth, ordered `False < Unknown < True` so conjunction is
/// `min` and disjunction is `max`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Truth {
    False,
    Unknown,
    True,
}

impl Truth {
    pub fn negate(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::Unknown => Truth::Unknown,
            Truth::False => Truth::True,
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::True => write!(f, "true"),
            Truth::Unknown => write!(f, "unknown"),
            Truth::False => write!(f, "false"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub semantics: Semantics,
    pub occurs_check: bool,
    /// SLDNF derivation depth bound; exceeding it sets the `bounded` flag on
    /// the outcome rather than failing silently.
    pub max_depth: Option<usize>,
    pub max_steps: Option<u64>,
    pub max_answers: Option<usize>,
    pub scope: Option<ModuleId>,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            semantics: Semantics::Sldnf,
            occurs_check: true,
            max_depth: Some(4_000_000),
            max_steps: None,
            max_answers: None,
            scope: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("call to unbound variable")]
    UnboundGoal,
    #[error("{0}")]
    Type(#[from] TypeError),
    #[error("knowledge base: {0}")]
    Kb(#[from] KbError),
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("cannot order timepoints {0} and {1}")]
    TimeOrder(String, String),
    #[error("placeholder _{0} has no argument")]
    Placeholder(u32),
    #[error("{0}")]
    Builtin(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Clone, Debug)]
pub struct Answer {
    /// Bindings projected onto the query variables.
    pub subst: Subst,
    /// The query instantiated by those bindings.
    pub goal: Term,
    pub truth: Truth,
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub answers: Vec<Answer>,
    /// Set when a resource bound (depth, steps or deadline) cut the search
    /// short; absence of answers then means "unknown", not "no".
    pub bounded: bool,
}

impl Outcome {
    pub fn is_true(&self) -> bool {
        self.answers.iter().any(|a| a.truth == Truth::True)
    }

    /// Summary truth value for the query as a whole.
    pub fn truth(&self) -> Truth {
        if self.is_true() {
            Truth::True
        } else if self.bounded || self.answers.iter().any(|a| a.truth == Truth::Unknown) {
            Truth::Unknown
        } else {
            Truth::False
        }
    }
}

pub type CustomBuiltin =
    Arc<dyn Fn(&mut Session, &[Term], &Subst) -> Result<Vec<Subst>, SolveError> + Send + Sync>;

/// Candidate clauses for one goal, either the shared index bucket or an
/// owned list merged with overlays. Indexed access so callers can hold it
/// while mutating the session.
pub(crate) enum ClauseBatch {
    Shared(Arc<Vec<ClauseRef>>),
    Owned(Vec<Arc<Clause>>),
}

impl ClauseBatch {
    pub(crate) fn get(&self, i: usize) -> Option<&Arc<Clause>> {
        match self {
            ClauseBatch::Shared(v) => v.get(i).map(|cr| &cr.clause),
            ClauseBatch::Owned(v) => v.get(i),
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            ClauseBatch::Shared(v) => v.len(),
            ClauseBatch::Owned(v) => v.len(),
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Snapshot of the session's effect-visible state. Restoring one undoes
/// knowledge updates, notifications and throttle firings made after it.
pub struct Checkpoint {
    kb: KnowledgeState,
    outbox_len: usize,
    throttle: HashMap<(Sym, String), i64>,
}

pub struct Session {
    pub kb: KnowledgeState,
    pub registry: Arc<TypeRegistry>,
    pub config: SolverConfig,
    pub clock: VirtualClock,
    pub env: SimEnvironment,
    pub outbox: Vec<Notification>,
    /// Hypothetical facts visible as extra clauses during integrity tests.
    pub overlay: Vec<Arc<Clause>>,
    /// Identity of the reaction rule currently being evaluated, used to key
    /// interval throttles.
    pub current_rule: Option<Sym>,
    /// Memo table entries of the last memoizing run, for benchmark reports.
    pub memo_entries: usize,
    /// Trajectory parameters currently being measured; `valueAt` refuses
    /// re-entry for a parameter on this stack so that events derived from a
    /// trajectory cannot circularly clip the fluent being measured.
    pub(crate) trajectory_guard: Vec<Term>,
    fresh: u64,
    steps: u64,
    bounded_flag: bool,
    deadline: Option<Instant>,
    time_order_cache: Option<(u64, Arc<HashMap<Sym, usize>>)>,
    throttle: HashMap<(Sym, String), i64>,
    custom: HashMap<(Sym, usize), CustomBuiltin>,
}

impl Session {
    pub fn new(kb: KnowledgeState) -> Session {
        Session {
            kb,
            registry: Arc::new(TypeRegistry::new()),
            config: SolverConfig::default(),
            clock: VirtualClock::default(),
            env: SimEnvironment::new(),
            outbox: Vec::new(),
            overlay: Vec::new(),
            current_rule: None,
            memo_entries: 0,
            trajectory_guard: Vec::new(),
            fresh: 0,
            steps: 0,
            bounded_flag: false,
            deadline: None,
            time_order_cache: None,
            throttle: HashMap::new(),
            custom: HashMap::new(),
        }
    }

    pub fn with_registry(mut self, registry: Arc<TypeRegistry>) -> Session {
        self.registry = registry;
        self
    }

    pub fn register_builtin(&mut self, name: &str, arity: usize, f: CustomBuiltin) {
        self.custom.insert((Sym::new(name), arity), f);
    }

    pub(crate) fn custom_builtin(&self, name: Sym, arity: usize) -> Option<CustomBuiltin> {
        self.custom.get(&(name, arity)).cloned()
    }

    /// Wall-clock budget for everything solved on this session from now on.
    pub fn set_budget(&mut self, d: std::time::Duration) {
        self.deadline = Some(Instant::now() + d);
    }

    pub fn clear_budget(&mut self) {
        self.deadline = None;
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kb: self.kb.clone(),
            outbox_len: self.outbox.len(),
            throttle: self.throttle.clone(),
        }
    }

    pub fn restore(&mut self, cp: Checkpoint) {
        self.kb = cp.kb;
        self.outbox.truncate(cp.outbox_len);
        self.throttle = cp.throttle;
        self.time_order_cache = None;
    }

    /// Fresh variable-index offset for renaming a clause apart.
    pub(crate) fn fresh_offset(&mut self) -> u64 {
        self.fresh += 1;
        self.fresh << 20
    }

    pub(crate) fn fresh_var(&mut self, name: &str) -> Var {
        Var { name: Sym::new(name), index: self.fresh_offset() + 1, ty: None }
    }

    /// Counts a resolution step against the budgets. Returns false when a
    /// budget is exceeded, which also latches the outcome's `bounded` flag.
    pub(crate) fn tick(&mut self) -> bool {
        self.steps += 1;
        if let Some(max) = self.config.max_steps {
            if self.steps > max {
                self.bounded_flag = true;
                return false;
            }
        }
        if self.steps % 512 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.bounded_flag = true;
                    return false;
                }
            }
        }
        true
    }

    pub(crate) fn mark_bounded(&mut self) {
        self.bounded_flag = true;
    }

    pub(crate) fn take_bounded(&mut self) -> bool {
        std::mem::take(&mut self.bounded_flag)
    }

    pub(crate) fn bounded(&self) -> bool {
        self.bounded_flag
    }

    /// Clauses for a predicate: overlay hypotheses first, then the knowledge
    /// state in global order (restricted to the configured scope, if any).
    /// Without overlay or scope this shares the index bucket instead of
    /// copying it, so a resolution step costs O(1) regardless of fact count.
    pub(crate) fn clauses(&self, key: &PredKey) -> ClauseBatch {
        let plain = self.config.scope.is_none()
            && !self.overlay.iter().any(|c| c.head.pred_key().as_ref() == Some(key));
        if plain {
            return match self.kb.bucket(key) {
                Some(b) => ClauseBatch::Shared(Arc::clone(b)),
                None => ClauseBatch::Owned(Vec::new()),
            };
        }
        let mut out: Vec<Arc<Clause>> = self
            .overlay
            .iter()
            .filter(|c| c.head.pred_key().as_ref() == Some(key))
            .cloned()
            .collect();
        out.extend(
            self.kb
                .clauses_for(key, self.config.scope.as_ref())
                .map(|cr| Arc::clone(&cr.clause)),
        );
        ClauseBatch::Owned(out)
    }

    pub(crate) fn has_clauses(&self, key: &PredKey) -> bool {
        !self.clauses(key).is_empty()
    }

    pub(crate) fn throttle_last(&self, key: &(Sym, String)) -> Option<i64> {
        self.throttle.get(key).copied()
    }

    pub(crate) fn throttle_fire(&mut self, key: (Sym, String), at: i64) {
        self.throttle.insert(key, at);
    }

    /// Rank map for symbolic timepoints declared via `timeOrder([...])`
    /// facts, cached per knowledge state.
    pub(crate) fn time_order(&mut self) -> Arc<HashMap<Sym, usize>> {
        let seq = self.kb.state_index();
        if let Some((s, cached)) = &self.time_order_cache {
            if *s == seq {
                return Arc::clone(cached);
            }
        }
        let mut ranks: HashMap<Sym, usize> = HashMap::new();
        let key = PredKey { negated: false, functor: Sym::new("timeOrder"), arity: 1 };
        for cr in self.kb.clauses_for(&key, None) {
            if !cr.clause.is_fact() {
                continue;
            }
            if let Some(items) = cr.clause.head.args()[0].as_list() {
                for item in items {
                    if let Term::Const { name, .. } = item {
                        let next = ranks.len();
                        ranks.entry(name).or_insert(next);
                    }
                }
            }
        }
        let ranks = Arc::new(ranks);
        self.time_order_cache = Some((seq, Arc::clone(&ranks)));
        ranks
    }
}

/// Assembles answers: bindings projected onto the query variables, the
/// instantiated query, duplicates collapsed keeping the strongest truth.
pub(crate) fn build_outcome(goals: &[Term], results: Vec<(Subst, Truth)>) -> Outcome {
    let conj = if goals.len() == 1 {
        goals[0].clone()
    } else {
        Term::complex(",", goals.to_vec())
    };
    let mut vars: Vec<Var> = Vec::new();
    for g in goals {
        g.collect_vars(&mut vars);
    }
    let mut seen = std::collections::HashSet::new();
    vars.retain(|v| seen.insert(v.key()));

    let mut answers: Vec<Answer> = Vec::new();
    let mut index: HashMap<Term, usize> = HashMap::new();
    for (s, truth) in results {
        let goal = s.apply(&conj);
        let canon = goal.canonicalize();
        match index.get(&canon) {
            Some(&i) => {
                if truth > answers[i].truth {
                    answers[i].truth = truth;
                }
            }
            None => {
                index.insert(canon, answers.len());
                answers.push(Answer { subst: s.project(&vars), goal, truth });
            }
        }
    }
    Outcome { answers, bounded: false }
}

/// Solves a conjunction on the session, dispatching on the configured
/// semantics.
pub fn solve(session: &mut Session, goals: &[Term]) -> Result<Outcome, SolveError> {
    let prior = session.take_bounded();
    let result = match session.config.semantics {
        Semantics::Sldnf => machine::run_query(session, goals),
        Semantics::Wfs => tabled::run_query(session, goals),
    };
    let mut outcome = result?;
    outcome.bounded |= session.take_bounded();
    if prior {
        session.mark_bounded();
    }
    Ok(outcome)
}

pub fn solve_goal(session: &mut Session, goal: &Term) -> Result<Outcome, SolveError> {
    solve(session, std::slice::from_ref(goal))
}

/// Summary truth of a goal.
pub fn truth_of(session: &mut Session, goal: &Term) -> Result<Truth, SolveError> {
    Ok(solve_goal(session, goal)?.truth())
}

pub fn holds(session: &mut Session, goal: &Term) -> Result<bool, SolveError> {
    Ok(truth_of(session, goal)? == Truth::True)
}

/// Arithmetic evaluation; `None` when the term is not ground arithmetic.
pub fn eval_arith(t: &Term, s: &Subst) -> Option<Num> {
    match s.resolve(t) {
        Term::Num(n) => Some(*n),
        Term::Complex { functor, args } if args.len() == 2 => {
            let a = eval_arith(&args[0], s)?.value();
            let b = eval_arith(&args[1], s)?.value();
            let v = match functor.as_str() {
                "+" => a + b,
                "-" => a - b,
                "*" => a * b,
                "/" => {
                    if b == 0.0 {
                        return None;
                    }
                    a / b
                }
                _ => return None,
            };
            Some(Num::new(v))
        }
        _ => None,
    }
}

/// Converts a `datetime(Y, M, D, H, Min, S)` term to epoch seconds.
pub fn datetime_to_seconds(t: &Term) -> Option<i64> {
    match t {
        Term::Complex { functor, args } if functor.as_str() == "datetime" && args.len() == 6 => {
            let mut parts = [0i64; 6];
            for (i, a) in args.iter().enumerate() {
                parts[i] = match a {
                    Term::Num(n) => n.as_int()?,
                    _ => return None,
                };
            }
            use chrono::{NaiveDate, NaiveDateTime};
            let date = NaiveDate::from_ymd_opt(parts[0] as i32, parts[1] as u32, parts[2] as u32)?;
            let dt: NaiveDateTime =
                date.and_hms_opt(parts[3] as u32, parts[4] as u32, parts[5] as u32)?;
            Some(dt.and_utc().timestamp())
        }
        _ => None,
    }
}

pub fn seconds_to_datetime(secs: i64) -> Term {
    use chrono::{Datelike, Timelike};
    let dt = chrono::DateTime::from_timestamp(secs, 0).expect("clock in datetime range");
    let d = dt.naive_utc();
    Term::complex(
        "datetime",
        vec![
            Term::int(d.year() as i64),
            Term::int(d.month() as i64),
            Term::int(d.day() as i64),
            Term::int(d.hour() as i64),
            Term::int(d.minute() as i64),
            Term::int(d.second() as i64),
        ],
    )
}

/// Numeric key for a timepoint term: a number, a `datetime(...)` term, or a
/// symbolic constant like `t7` with a numeric suffix.
fn numeric_timepoint(t: &Term) -> Option<f64> {
    match t {
        Term::Num(n) => Some(n.value()),
        Term::Complex { .. } => datetime_to_seconds(t).map(|s| s as f64),
        _ => None,
    }
}

fn split_suffix(name: &str) -> Option<(&str, u64)> {
    let digits = name.len() - name.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == name.len() {
        return None;
    }
    name[digits..].parse().ok().map(|n| (&name[..digits], n))
}

/// Orders two timepoint terms. Symbolic constants compare by numeric suffix
/// when they share an alphabetic prefix (`t1 < t10`), otherwise by a
/// `timeOrder([...])` declaration; anything else is an ordering error.
pub fn compare_timepoints(
    session: &mut Session,
    a: &Term,
    b: &Term,
) -> Result<std::cmp::Ordering, SolveError> {
    use std::cmp::Ordering;
    if let (Some(x), Some(y)) = (numeric_timepoint(a), numeric_timepoint(b)) {
        return Ok(x.partial_cmp(&y).unwrap_or(Ordering::Equal));
    }
    if let (Term::Const { name: na, .. }, Term::Const { name: nb, .. }) = (a, b) {
        if na == nb {
            return Ok(Ordering::Equal);
        }
        if let (Some((pa, sa)), Some((pb, sb))) = (split_suffix(na.as_str()), split_suffix(nb.as_str()))
        {
            if pa == pb {
                return Ok(sa.cmp(&sb));
            }
        }
        let order = session.time_order();
        if let (Some(ra), Some(rb)) = (order.get(na), order.get(nb)) {
            return Ok(ra.cmp(rb));
        }
    }
    Err(SolveError::TimeOrder(a.to_string(), b.to_string()))
}

//! Synthetic workload generators and a timing harness.
//!
//! Problem size is the total number of literals in the generated program.
//! Five families:
//!
//! * `chains(n)`: a linear chain `p0 :- p1. ... p_{n-1} :- p_n.` with one
//!   fact at the end, queried at the head.
//! * `dag(n, k)`: `n*k` rules `p_i :- p_{i+1}, ..., p_{i+k}` whose subgoals
//!   overlap, so every atom is demanded k times; k facts close the lattice.
//!   Without memoization the shared subgoals are re-derived exponentially
//!   often, with it each is solved once.
//! * `tree(n, k)`: a complete k-ary derivation tree of depth n with no
//!   sharing; internal nodes are rules over their children, leaves are
//!   facts, the root is queried.
//! * `eca_plain(n)`: n independent reaction rules `eca(true_i, noop(i))`
//!   over n condition facts; the runner times rule discovery and rule
//!   evaluation separately.
//! * `ec_holdsat(n)`: one fluent toggled by an alternating on/off event
//!   history of n timestamped facts, queried with `holdsAt` at the end of
//!   the history. Event facts are emitted newest first so the inertia
//!   axioms find the last initiating event without scanning the past.
//!
//! The derivation families come in propositional and single-variable
//! (datalog) variants and in strict or defeasible rule kinds; defeasible
//! runs go through the meta-program translation and query `defeasible(p0)`.
//! The two event families are strict and propositional by construction and
//! ignore those flags.

use crate::defeasible;
use crate::ec;
use crate::eca;
use crate::kb::{Clause, KnowledgeState, ModuleId};
use crate::solve::{self, Semantics, Session, Truth};
use crate::term::Term;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Family {
    Chains { n: usize },
    Dag { n: usize, k: usize },
    Tree { n: usize, k: usize },
    EcaPlain { n: usize },
    EcHoldsat { n: usize },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Chains { n } => write!(f, "chains({})", n),
            Family::Dag { n, k } => write!(f, "dag({},{})", n, k),
            Family::Tree { n, k } => write!(f, "tree({},{})", n, k),
            Family::EcaPlain { n } => write!(f, "eca_plain({})", n),
            Family::EcHoldsat { n } => write!(f, "ec_holdsat({})", n),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Variant {
    #[default]
    Propositional,
    Datalog,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Propositional => write!(f, "prop"),
            Variant::Datalog => write!(f, "datalog"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BenchSpec {
    pub family: Family,
    pub variant: Variant,
    pub defeasible: bool,
    pub memo: bool,
}

impl BenchSpec {
    pub fn new(family: Family) -> BenchSpec {
        BenchSpec { family, variant: Variant::Propositional, defeasible: false, memo: false }
    }

    pub fn datalog(mut self) -> BenchSpec {
        self.variant = Variant::Datalog;
        self
    }

    pub fn defeasible(mut self) -> BenchSpec {
        self.defeasible = true;
        self
    }

    pub fn memo(mut self) -> BenchSpec {
        self.memo = true;
        self
    }
}

impl fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.family,
            self.variant,
            if self.defeasible { "defeasible" } else { "strict" },
            if self.memo { "memo" } else { "no-memo" },
        )
    }
}

pub struct Generated {
    pub clauses: Vec<Clause>,
    /// Empty for the reaction-rule family, whose runner drives the rule
    /// processor instead of a query.
    pub query: Vec<Term>,
    pub literals: usize,
}

/// Nodes in a complete k-ary tree of depth d-1, i.e. 1 + k + ... + k^(d-1).
fn geometric(k: usize, d: usize) -> usize {
    if k == 1 {
        d
    } else {
        (k.pow(d as u32) - 1) / (k - 1)
    }
}

/// Literal count of a family before generating it. Defeasible rules
/// translate to 8 + 3b literals for body length b; facts stay strict.
pub fn predicted_literals(family: Family, defeasible: bool) -> usize {
    let rule = |b: usize| if defeasible { 8 + 3 * b } else { 1 + b };
    match family {
        Family::Chains { n } => n * rule(1) + 1,
        Family::Dag { n, k } => n * k * rule(k) + k,
        Family::Tree { n, k } => geometric(k, n) * rule(k) + k.pow(n as u32),
        Family::EcaPlain { n } => 2 * n,
        Family::EcHoldsat { n } => n + 2,
    }
}

pub fn generate(spec: &BenchSpec) -> Generated {
    let mk_rule = |head: Term, body: Vec<Term>| {
        if spec.defeasible {
            Clause::defeasible(head, body)
        } else {
            Clause::rule(head, body)
        }
    };
    let node = |i: usize, arg: &Term| {
        let name = format!("p{}", i);
        match spec.variant {
            Variant::Propositional => Term::constant(&name),
            Variant::Datalog => Term::complex(&name, vec![arg.clone()]),
        }
    };
    let wrap = |goal: Term| {
        if spec.defeasible {
            Term::complex("defeasible", vec![goal])
        } else {
            goal
        }
    };
    let x = Term::var("X");
    let a = Term::constant("a");

    let (clauses, query) = match spec.family {
        Family::Chains { n } => {
            let mut clauses = Vec::with_capacity(n + 1);
            for i in 0..n {
                clauses.push(mk_rule(node(i, &x), vec![node(i + 1, &x)]));
            }
            clauses.push(Clause::fact(node(n, &a)));
            (clauses, vec![wrap(node(0, &x))])
        }
        Family::Dag { n, k } => {
            let m = n * k;
            let mut clauses = Vec::with_capacity(m + k);
            for i in 0..m {
                let body = (i + 1..=i + k).map(|j| node(j, &x)).collect();
                clauses.push(mk_rule(node(i, &x), body));
            }
            for j in m..m + k {
                clauses.push(Clause::fact(node(j, &a)));
            }
            (clauses, vec![wrap(node(0, &x))])
        }
        Family::Tree { n, k } => {
            // 1-indexed heap layout: children of i are k(i-1)+2 ..= k(i-1)+k+1.
            let internal = geometric(k, n);
            let total = geometric(k, n + 1);
            let mut clauses = Vec::with_capacity(total);
            for i in 1..=internal {
                let body = (0..k).map(|c| node(k * (i - 1) + 2 + c, &x)).collect();
                clauses.push(mk_rule(node(i, &x), body));
            }
            for i in internal + 1..=total {
                clauses.push(Clause::fact(node(i, &a)));
            }
            (clauses, vec![wrap(node(1, &x))])
        }
        Family::EcaPlain { n } => {
            let mut clauses = Vec::with_capacity(2 * n);
            for i in 0..n {
                clauses.push(Clause::fact(Term::constant(&format!("true{}", i))));
            }
            for i in 0..n {
                clauses.push(Clause::fact(Term::complex(
                    "eca",
                    vec![
                        Term::constant(&format!("true{}", i)),
                        Term::complex("noop", vec![Term::int(i as i64)]),
                    ],
                )));
            }
            (clauses, Vec::new())
        }
        Family::EcHoldsat { n } => {
            let fluent = Term::constant("f");
            let on = Term::constant("e_on");
            let off = Term::constant("e_off");
            let t = Term::var("T");
            let mut clauses = Vec::with_capacity(n + 2);
            clauses.push(Clause::fact(Term::complex(
                "initiates",
                vec![on.clone(), fluent.clone(), t.clone()],
            )));
            clauses.push(Clause::fact(Term::complex(
                "terminates",
                vec![off.clone(), fluent.clone(), t],
            )));
            for at in (0..n).rev() {
                let ev = if at % 2 == 0 { on.clone() } else { off.clone() };
                clauses.push(Clause::fact(Term::complex(
                    "happens",
                    vec![ev, Term::int(at as i64)],
                )));
            }
            let query_at = if n % 2 == 0 { n - 1 } else { n };
            let query =
                Term::complex("holdsAt", vec![fluent, Term::int(query_at as i64)]);
            (clauses, vec![query])
        }
    };
    let literals = clauses.iter().map(|c| c.literal_count()).sum();
    Generated { clauses, query, literals }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub spec: BenchSpec,
    pub literals: usize,
    /// Literal count the solver actually sees, after defeasible translation.
    pub active_literals: usize,
    pub query: String,
    pub truth: Truth,
    pub elapsed: Duration,
    /// Reaction-rule runs report rule discovery separately.
    pub discover: Option<Duration>,
    /// Reaction-rule runs report rule evaluation separately.
    pub evaluate: Option<Duration>,
    /// The time budget cut the search short before it finished.
    pub exhausted: bool,
    pub memo_entries: usize,
    pub error: Option<String>,
}

/// Runs one experiment on a fresh engine inside a dedicated thread (the
/// memoizing solver recurses host-side, so deep chains need a large stack).
pub fn run(spec: &BenchSpec, budget: Duration) -> BenchResult {
    let spec = *spec;
    std::thread::Builder::new()
        .name("bench".into())
        .stack_size(512 << 20)
        .spawn(move || run_inner(&spec, budget))
        .expect("bench thread spawns")
        .join()
        .expect("bench run completes")
}

fn run_inner(spec: &BenchSpec, budget: Duration) -> BenchResult {
    let generated = generate(spec);
    let mut st = KnowledgeState::new();
    if matches!(spec.family, Family::EcHoldsat { .. }) {
        st = ec::install(st).expect("interval axioms install");
    }
    if spec.defeasible {
        let (id, clauses) = defeasible::bridge_module();
        st = st.add_module(id, clauses).expect("strict-fallback bridge installs");
    }
    let st = st
        .add_module(ModuleId::named("bench"), generated.clauses)
        .expect("workload loads");
    let active_literals = st.active_size();
    let mut session = Session::new(st);
    session.config.semantics = if spec.memo { Semantics::Wfs } else { Semantics::Sldnf };

    let mut result = BenchResult {
        spec: *spec,
        literals: generated.literals,
        active_literals,
        query: if generated.query.is_empty() {
            String::from("(poll cycle)")
        } else {
            generated.query.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
        },
        truth: Truth::Unknown,
        elapsed: Duration::ZERO,
        discover: None,
        evaluate: None,
        exhausted: false,
        memo_entries: 0,
        error: None,
    };
    session.set_budget(budget);

    if let Family::EcaPlain { n } = spec.family {
        let t0 = Instant::now();
        let (rules, diagnostics) = eca::discover(&mut session);
        let discover = t0.elapsed();
        let t1 = Instant::now();
        let fired = rules
            .iter()
            .map(|r| eca::evaluate(&mut session, r))
            .filter(|o| o.status == eca::Status::Fired)
            .count();
        let evaluate = t1.elapsed();
        result.elapsed = discover + evaluate;
        result.discover = Some(discover);
        result.evaluate = Some(evaluate);
        result.truth =
            if fired == n && diagnostics.is_empty() { Truth::True } else { Truth::False };
        return result;
    }

    let t0 = Instant::now();
    let outcome = solve::solve(&mut session, &generated.query);
    result.elapsed = t0.elapsed();
    result.memo_entries = session.memo_entries;
    match outcome {
        Ok(o) => {
            result.truth = o.truth();
            result.exhausted = o.bounded;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

#[derive(Clone, Copy, Debug)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares over (x, y) points. With zero variance in y the
/// fit is exact by convention (r2 = 1).
pub fn fit_linear(points: &[(f64, f64)]) -> LinearFit {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "need at least two points");
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    assert!(sxx > 0.0, "x values must vary");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LinearFit { slope, intercept, r2 }
}

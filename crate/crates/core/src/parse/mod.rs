//! Script parser.
//!
//! Recursive descent over the token stream. A program is a sequence of
//! clauses and directives:
//!
//! ```text
//! (r1) discount(X, 5) :- gold(X), not(blocked(X)).
//! (r2) discount(X, 10) <= platinum(X).          % defeasible neck
//! :- solve(discount(c1, D)).
//! ```
//!
//! Body literals are expressions: comparison operators bind loosest, then
//! additive, then multiplicative. Heads are plain literals, never infix
//! expressions, so `<=` after a head is always the defeasible neck while
//! `=<` inside a body is always the comparison.
//!
//! Variables start with an uppercase letter or `_`; `_` alone is a fresh
//! anonymous variable per occurrence and `_0`, `_1`, ... are argument
//! placeholders for textual updates. Types attach to variables either with a
//! colon (`X:gold`) or, when a registry is supplied, with a dotted prefix
//! (`account.A` reads as variable `A` of type `account`). Dotted names whose
//! prefix is not a known type are ordinary constants or functors, e.g.
//! `java.lang.Math.max(X, Y, M)`.

mod lexer;

pub use lexer::{lex, LexError, Pos, Spanned, Tok};

use crate::kb::{Clause, ClauseKind};
use crate::sym::Sym;
use crate::term::{Term, Var};
use crate::types::TypeRegistry;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.message)
    }
}

impl std::error::Error for ParseError {}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> ParseError {
        ParseError { pos: Pos { line: e.line, col: e.col }, message: e.message }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveMode {
    /// `:- solve(G).` query for all answers.
    Solve,
    /// `:- eval(G).` query evaluated for side effects.
    Eval,
    /// Any other `:- g1, g2.` directive.
    Other,
}

#[derive(Debug, Clone)]
pub struct Directive {
    pub mode: DirectiveMode,
    pub goals: Vec<Term>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedProgram {
    pub clauses: Vec<Clause>,
    pub directives: Vec<Directive>,
}

/// Parses without type resolution; dotted names stay constants and colon
/// annotations are kept as written.
pub fn parse_program(text: &str) -> Result<ParsedProgram, ParseError> {
    Parser::new(text, None)?.program()
}

/// Parses with typed-variable resolution against a registry. Unknown colon
/// annotations are reported as parse errors here.
pub fn parse_program_typed(
    text: &str,
    registry: &TypeRegistry,
) -> Result<ParsedProgram, ParseError> {
    Parser::new(text, Some(registry))?.program()
}

/// Parses clause text for textual updates; directives are rejected.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, ParseError> {
    let prog = parse_program(text)?;
    if let Some(d) = prog.directives.first() {
        return Err(ParseError { pos: d.pos, message: "directive not allowed here".into() });
    }
    Ok(prog.clauses)
}

/// Parses a single goal conjunction such as `p(X), X < 3`.
pub fn parse_goals(text: &str) -> Result<Vec<Term>, ParseError> {
    let trimmed = text.trim().trim_end_matches('.');
    let mut p = Parser::new(trimmed, None)?;
    let goals = p.body()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input after goal".into()));
    }
    Ok(p.fixup_types_all(goals))
}

/// Parses a single term.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let goals = parse_goals(text)?;
    if goals.len() != 1 {
        return Err(ParseError {
            pos: Pos { line: 1, col: 1 },
            message: format!("expected one term, got {}", goals.len()),
        });
    }
    Ok(goals.into_iter().next().unwrap())
}

struct Parser<'r> {
    toks: Vec<Spanned>,
    at: usize,
    registry: Option<&'r TypeRegistry>,
    // Per-clause variable scope: name -> index, plus annotation per index.
    scope: HashMap<String, u64>,
    var_types: HashMap<u64, Sym>,
    next_var: u64,
}

impl<'r> Parser<'r> {
    fn new(text: &str, registry: Option<&'r TypeRegistry>) -> Result<Parser<'r>, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
            registry,
            scope: HashMap::new(),
            var_types: HashMap::new(),
            next_var: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|s| &s.tok)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.at)
            .or_else(|| self.toks.last())
            .map(|s| s.pos)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|s| s.tok.clone());
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, wanted: &Tok) -> bool {
        if self.peek() == Some(wanted) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, wanted: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(wanted) {
            Ok(())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    fn err(&self, message: String) -> ParseError {
        ParseError { pos: self.pos(), message }
    }

    fn program(&mut self) -> Result<ParsedProgram, ParseError> {
        let mut prog = ParsedProgram::default();
        while self.peek().is_some() {
            self.scope.clear();
            self.var_types.clear();
            if self.peek() == Some(&Tok::Neck) {
                let pos = self.pos();
                self.at += 1;
                let goals = self.body()?;
                self.expect(&Tok::Dot, "'.' after directive")?;
                prog.directives.push(self.finish_directive(goals, pos));
            } else {
                prog.clauses.push(self.clause()?);
            }
        }
        Ok(prog)
    }

    fn finish_directive(&mut self, goals: Vec<Term>, pos: Pos) -> Directive {
        let goals = self.fixup_types_all(goals);
        if goals.len() == 1 {
            if let Term::Complex { functor, args } = &goals[0] {
                let mode = match functor.as_str() {
                    "solve" => Some(DirectiveMode::Solve),
                    "eval" => Some(DirectiveMode::Eval),
                    _ => None,
                };
                if let Some(mode) = mode {
                    return Directive { mode, goals: args.clone(), pos };
                }
            }
        }
        Directive { mode: DirectiveMode::Other, goals, pos }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let label = if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let l = match self.bump() {
                Some(Tok::Name(segs)) => segs.join("."),
                _ => return Err(self.err("expected rule label".into())),
            };
            self.expect(&Tok::RParen, "')' after rule label")?;
            Some(Sym::new(&l))
        } else {
            None
        };
        let head = self.primary()?;
        if head.pred_key().is_none() {
            return Err(self.err(format!("clause head must be a literal, got {}", head)));
        }
        let (kind, mut body) = if self.eat(&Tok::Dot) {
            (ClauseKind::Strict, Vec::new())
        } else if self.eat(&Tok::Neck) {
            let b = self.body()?;
            self.expect(&Tok::Dot, "'.' after clause body")?;
            (ClauseKind::Strict, b)
        } else if self.eat(&Tok::DefNeck) {
            let b = self.body()?;
            self.expect(&Tok::Dot, "'.' after clause body")?;
            (ClauseKind::Defeasible, b)
        } else {
            return Err(self.err("expected '.', ':-' or '<=' after clause head".into()));
        };
        // `p :- true.` and `p <= true.` are facts.
        if body.len() == 1 && body[0] == Term::constant("true") {
            body.clear();
        }
        let head = self.fixup_types(head);
        let body = self.fixup_types_all(body);
        Ok(Clause { label, kind, head, body })
    }

    fn body(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut items = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            items.push(self.expr()?);
        }
        Ok(items)
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        let lhs = self.additive()?;
        if let Some(Tok::Op(op)) = self.peek() {
            if let Some((1, _)) = crate::term::operator_info(op) {
                let op = *op;
                self.at += 1;
                let rhs = self.additive()?;
                return Ok(Term::complex(op, vec![lhs, rhs]));
            }
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.multiplicative()?;
        while let Some(Tok::Op(op @ ("+" | "-"))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.multiplicative()?;
            lhs = Term::complex(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ("*" | "/"))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.unary()?;
            lhs = Term::complex(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        if let Some(Tok::Op("-")) = self.peek() {
            self.at += 1;
            return match self.peek() {
                Some(Tok::Num(n)) => {
                    let v = -*n;
                    self.at += 1;
                    Ok(Term::num(v))
                }
                _ => {
                    let inner = self.unary()?;
                    Ok(Term::complex("-", vec![Term::int(0), inner]))
                }
            };
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(Term::num(n))
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(Term::str(&s))
            }
            Some(Tok::Placeholder(i)) => {
                self.at += 1;
                Ok(Term::Placeholder(i))
            }
            Some(Tok::Bang) => {
                self.at += 1;
                Ok(Term::cut())
            }
            Some(Tok::Anon(name)) => {
                self.at += 1;
                if name == "_" {
                    let idx = self.next_var;
                    self.next_var += 1;
                    Ok(Term::Var(Var { name: Sym::new("_"), index: idx, ty: None }))
                } else {
                    Ok(self.named_var(&name, None)?)
                }
            }
            Some(Tok::LBracket) => {
                self.at += 1;
                self.list()
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Name(segs)) => {
                self.at += 1;
                self.name_form(segs)
            }
            _ => Err(self.err("expected a term".into())),
        }
    }

    fn list(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::RBracket) {
            return Ok(Term::Nil);
        }
        let mut items = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            items.push(self.expr()?);
        }
        let tail = if self.eat(&Tok::Pipe) { Some(self.expr()?) } else { None };
        self.expect(&Tok::RBracket, "']' to close list")?;
        Ok(match tail {
            Some(t) => Term::list_with_tail(items, t),
            None => Term::list(items),
        })
    }

    fn name_form(&mut self, segs: Vec<String>) -> Result<Term, ParseError> {
        if self.peek() == Some(&Tok::LParen) {
            // Functor application; dotted segments join into one functor name.
            if segs.len() == 1 && starts_upper(&segs[0]) {
                return Err(self.err(format!("variable {} cannot be a functor", segs[0])));
            }
            self.at += 1;
            let functor = segs.join(".");
            if self.eat(&Tok::RParen) {
                return Ok(Term::constant(&functor));
            }
            let mut args = vec![self.expr()?];
            while self.eat(&Tok::Comma) {
                args.push(self.expr()?);
            }
            self.expect(&Tok::RParen, "')' to close argument list")?;
            return Ok(Term::complex(&functor, args));
        }

        let annotation = self.colon_annotation()?;

        if segs.len() == 1 {
            let name = &segs[0];
            if starts_upper(name) {
                return self.named_var(name, annotation);
            }
            return Ok(match annotation {
                Some(ty) => Term::typed_constant(name, ty.as_str()),
                None => Term::constant(name),
            });
        }

        // Dotted name without parens: typed variable if the longest dotted
        // prefix names a registered type and the remainder is one uppercase
        // segment; otherwise a dotted constant.
        if annotation.is_none() {
            if let Some(reg) = self.registry {
                let last = &segs[segs.len() - 1];
                if starts_upper(last) {
                    let prefix = segs[..segs.len() - 1].join(".");
                    if reg.is_registered(Sym::new(&prefix)) {
                        return self.named_var(last, Some(Sym::new(&prefix)));
                    }
                }
            }
        }
        let name = segs.join(".");
        Ok(match annotation {
            Some(ty) => Term::typed_constant(&name, ty.as_str()),
            None => Term::constant(&name),
        })
    }

    fn colon_annotation(&mut self) -> Result<Option<Sym>, ParseError> {
        if !self.eat(&Tok::Colon) {
            return Ok(None);
        }
        match self.bump() {
            Some(Tok::Name(segs)) => {
                let ty = segs.join(".");
                if let Some(reg) = self.registry {
                    if !reg.is_registered(Sym::new(&ty)) {
                        return Err(self.err(format!("unknown type {}", ty)));
                    }
                }
                Ok(Some(Sym::new(&ty)))
            }
            _ => Err(self.err("expected type name after ':'".into())),
        }
    }

    fn named_var(&mut self, name: &str, ty: Option<Sym>) -> Result<Term, ParseError> {
        let index = match self.scope.get(name) {
            Some(i) => *i,
            None => {
                let i = self.next_var;
                self.next_var += 1;
                self.scope.insert(name.to_string(), i);
                i
            }
        };
        if let Some(t) = ty {
            if let Some(prev) = self.var_types.get(&index) {
                if *prev != t {
                    return Err(self.err(format!(
                        "conflicting types {} and {} for variable {}",
                        prev, t, name
                    )));
                }
            }
            self.var_types.insert(index, t);
        }
        Ok(Term::Var(Var { name: Sym::new(name), index, ty: None }))
    }

    /// Propagates colon annotations to every occurrence of the variable.
    fn fixup_types(&self, t: Term) -> Term {
        if self.var_types.is_empty() {
            return t;
        }
        match t {
            Term::Var(mut v) => {
                if let Some(ty) = self.var_types.get(&v.index) {
                    v.ty = Some(*ty);
                }
                Term::Var(v)
            }
            Term::Complex { functor, args } => Term::Complex {
                functor,
                args: args.into_iter().map(|a| self.fixup_types(a)).collect(),
            },
            Term::Cons(h, t2) => {
                Term::Cons(Box::new(self.fixup_types(*h)), Box::new(self.fixup_types(*t2)))
            }
            other => other,
        }
    }

    fn fixup_types_all(&self, ts: Vec<Term>) -> Vec<Term> {
        ts.into_iter().map(|t| self.fixup_types(t)).collect()
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().map(|c| c.is_ascii_uppercase()).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn one_clause(text: &str) -> Clause {
        let p = parse_program(text).unwrap();
        assert_eq!(p.clauses.len(), 1, "expected one clause in {:?}", text);
        p.clauses.into_iter().next().unwrap()
    }

    #[test]
    fn facts_and_rules() {
        let c = one_clause("gold(peter_miller).");
        assert!(c.is_fact());
        assert_eq!(c.head.to_string(), "gold(peter_miller)");

        let c = one_clause("discount(X, 5) :- gold(X), not(blocked(X)).");
        assert_eq!(c.kind, ClauseKind::Strict);
        assert_eq!(c.body.len(), 2);
        assert_eq!(c.body[1].to_string(), "not(blocked(X))");
    }

    #[test]
    fn defeasible_neck_and_label() {
        let c = one_clause("(r1) discount(X, 10) <= platinum(X).");
        assert_eq!(c.kind, ClauseKind::Defeasible);
        assert_eq!(c.label.unwrap().as_str(), "r1");
        let f = one_clause("(f1) special <= true.");
        assert!(f.is_fact());
        assert_eq!(f.kind, ClauseKind::Defeasible);
    }

    #[test]
    fn body_expressions_and_comparisons() {
        let c = one_clause("late(T) :- T2 = T1 + ttrmax, T > T2 * 2.");
        assert_eq!(c.body[0].to_string(), "T2 = T1 + ttrmax");
        assert_eq!(c.body[1].to_string(), "T > T2 * 2");
        // =< is the comparison; <= is only a neck.
        let c = one_clause("ok(X) :- X =< 10.");
        assert_eq!(c.body[0].functor_name().unwrap().as_str(), "<=");
        let c = one_clause("prec(X) :- X = (1 + 2) * 3.");
        assert_eq!(c.body[0].to_string(), "X = (1 + 2) * 3");
    }

    #[test]
    fn dotted_functors_and_strings() {
        let c = one_clause(r#"load(S) :- rbsla.utils.WebService.load("http://a", S)."#);
        assert_eq!(c.body[0].functor_name().unwrap().as_str(), "rbsla.utils.WebService.load");
        assert_eq!(c.body[0].args()[0], Term::str("http://a"));
    }

    #[test]
    fn lists_and_predicate_patterns() {
        let c = one_clause("defeasible([P|Args]) :- bound(P), derive([P|Args]).");
        match &c.head {
            Term::Complex { args, .. } => assert!(matches!(args[0], Term::Cons(_, _))),
            other => panic!("unexpected head {:?}", other),
        }
        let c = one_clause("l([1, 2|T]).");
        assert_eq!(c.head.to_string(), "l([1, 2|T])");
    }

    #[test]
    fn variables_scoped_per_clause() {
        let p = parse_program("p(X) :- q(X). r(X).").unwrap();
        let x1 = p.clauses[0].head.vars()[0];
        let x2 = p.clauses[1].head.vars()[0];
        assert_ne!(x1, x2);
        // same name within a clause is the same variable
        let vars = p.clauses[0].body[0].vars();
        assert_eq!(x1, vars[0]);
    }

    #[test]
    fn anonymous_vars_are_fresh() {
        let c = one_clause("p(_, _).");
        let vars = c.head.vars();
        assert_eq!(vars.len(), 2);
        assert_ne!(vars[0], vars[1]);
    }

    #[test]
    fn colon_typed_variables() {
        let mut reg = TypeRegistry::new();
        reg.register("customer", &[]).unwrap();
        reg.register("gold", &["customer"]).unwrap();
        let p = parse_program_typed("price(X:gold, P) :- base(X, P).", &reg).unwrap();
        match &p.clauses[0].head.args()[0] {
            Term::Var(v) => assert_eq!(v.ty.unwrap().as_str(), "gold"),
            other => panic!("unexpected {:?}", other),
        }
        // annotation propagates to the body occurrence
        match &p.clauses[0].body[0].args()[0] {
            Term::Var(v) => assert_eq!(v.ty.unwrap().as_str(), "gold"),
            other => panic!("unexpected {:?}", other),
        }
        assert!(parse_program_typed("p(X:unknown).", &reg).is_err());
    }

    #[test]
    fn dotted_typed_variables_need_registry() {
        let mut reg = TypeRegistry::new();
        reg.register("account", &[]).unwrap();
        let p = parse_program_typed("owner(account.A, P).", &reg).unwrap();
        match &p.clauses[0].head.args()[0] {
            Term::Var(v) => {
                assert_eq!(v.name.as_str(), "A");
                assert_eq!(v.ty.unwrap().as_str(), "account");
            }
            other => panic!("unexpected {:?}", other),
        }
        // without the registry it reads as a dotted constant
        let p = parse_program("owner(account.A, P).").unwrap();
        assert_eq!(p.clauses[0].head.args()[0], Term::constant("account.A"));
    }

    #[test]
    fn conflicting_annotations_rejected() {
        let mut reg = TypeRegistry::new();
        reg.register("a", &[]).unwrap();
        reg.register("b", &[]).unwrap();
        assert!(parse_program_typed("p(X:a) :- q(X:b).", &reg).is_err());
    }

    #[test]
    fn placeholders_parse() {
        let cs = parse_clauses("happens(outage(_0), _1).").unwrap();
        assert_eq!(cs[0].head.to_string(), "happens(outage(_0), _1)");
        assert!(cs[0].head.args().iter().any(|t| matches!(t, Term::Complex { .. })));
    }

    #[test]
    fn directives() {
        let p = parse_program(":- solve(discount(c1, D)). :- eval(update(id1, \"p.\")).").unwrap();
        assert_eq!(p.directives.len(), 2);
        assert_eq!(p.directives[0].mode, DirectiveMode::Solve);
        assert_eq!(p.directives[0].goals[0].to_string(), "discount(c1, D)");
        assert_eq!(p.directives[1].mode, DirectiveMode::Eval);
        let p = parse_program(":- register(add, 3).").unwrap();
        assert_eq!(p.directives[0].mode, DirectiveMode::Other);
    }

    #[test]
    fn cut_and_negations() {
        let c = one_clause("first(X) :- gen(X), !.");
        assert!(c.body[1].is_cut());
        let c = one_clause("neg(p(X)) :- q(X).");
        let key = c.head.pred_key().unwrap();
        assert!(key.negated);
    }

    #[test]
    fn error_positions() {
        let e = parse_program("p(X) :- q(X)").unwrap_err();
        assert_eq!(e.pos.line, 1);
        let e = parse_program("p :- .").unwrap_err();
        assert!(e.message.contains("term"));
        let e = parse_program("X :- p.").unwrap_err();
        assert!(e.message.contains("head"));
    }

    #[test]
    fn goal_helper() {
        let gs = parse_goals("p(X), X < 3").unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(parse_term("f(a, [1|T])").unwrap().to_string(), "f(a, [1|T])");
    }

    #[test]
    fn display_parse_round_trip_examples() {
        for text in [
            "discount(X, 5) :- gold(X), not(blocked(X)).",
            "(r1) p(X) <= q(X), not(r(X)).",
            "holdsAt(F, T) :- happens(E, T0), initiates(E, F, T0), T0 < T, not(clipped(T0, F, T)).",
            "p([1, 2, 3]).",
            "p([H|T]) :- q(H), p(T).",
            "v(X) :- X = (1 + 2) * f(Y).",
            "neg(p(a)).",
        ] {
            let c = one_clause(text);
            let c2 = one_clause(&c.to_string());
            assert_eq!(c.head.canonicalize(), c2.head.canonicalize(), "in {}", text);
            assert_eq!(c.body.len(), c2.body.len());
            for (a, b) in c.body.iter().zip(c2.body.iter()) {
                assert_eq!(
                    Term::complex("b", vec![c.head.clone(), a.clone()]).canonicalize(),
                    Term::complex("b", vec![c2.head.clone(), b.clone()]).canonicalize(),
                    "in {}",
                    text
                );
            }
        }
    }
}

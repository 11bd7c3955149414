//! Term representation and substitutions.
//!
//! The knowledge base is homogeneous: clauses, goals, integrity constraints,
//! event definitions and ECA rules are all built from the same `Term` values.
//! Negations are ordinary functors (`neg(...)` for explicit negation,
//! `not(...)` for negation as failure); the solver and the indexes give them
//! their meaning. Terms are immutable values and safe to share across threads.

use crate::sym::Sym;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Numeric constant. One numeric domain: values compare and unify by value,
/// so `7` and `7.0` are the same number. NaN and negative zero are
/// canonicalized so equality and hashing agree.
#[derive(Clone, Copy, Debug)]
pub struct Num(f64);

impl Num {
    pub fn new(v: f64) -> Num {
        if v.is_nan() {
            Num(f64::NAN)
        } else if v == 0.0 {
            Num(0.0)
        } else {
            Num(v)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn as_int(self) -> Option<i64> {
        if self.0.fract() == 0.0 && self.0.abs() < 9e15 {
            Some(self.0 as i64)
        } else {
            None
        }
    }
}

impl PartialEq for Num {
    fn eq(&self, other: &Num) -> bool {
        if self.0.is_nan() {
            other.0.is_nan()
        } else {
            self.0 == other.0
        }
    }
}
impl Eq for Num {}

impl std::hash::Hash for Num {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let canon = if self.0.is_nan() { f64::NAN } else { self.0 };
        canon.to_bits().hash(state);
    }
}

impl PartialOrd for Num {
    fn partial_cmp(&self, other: &Num) -> Option<std::cmp::Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_int() {
            Some(i) => write!(f, "{}", i),
            None => write!(f, "{}", self.0),
        }
    }
}

/// A logic variable. `index` 0 marks source-level variables; renamed-apart
/// copies get fresh indexes from the solver's counter. The optional type is
/// the interned qualified type name (`lang.Integer`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Var {
    pub name: Sym,
    pub index: u64,
    pub ty: Option<Sym>,
}

impl Var {
    pub fn new(name: &str) -> Var {
        Var { name: Sym::new(name), index: 0, ty: None }
    }

    pub fn typed(name: &str, ty: &str) -> Var {
        Var { name: Sym::new(name), index: 0, ty: Some(Sym::new(ty)) }
    }

    /// Identity of the variable as a binding key. The attached type is not
    /// part of the identity: a variable has one binding site.
    pub fn key(&self) -> VarKey {
        (self.name, self.index)
    }
}

pub type VarKey = (Sym, u64);

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(Var),
    /// Symbolic constant with optional attached type name.
    Const { name: Sym, ty: Option<Sym> },
    Num(Num),
    Str(Arc<str>),
    /// Compound term `functor(args...)`.
    Complex { functor: Sym, args: Vec<Term> },
    /// List cell `[head|tail]`.
    Cons(Box<Term>, Box<Term>),
    Nil,
    /// `_N` placeholder inside quoted update bodies; resolved by the update
    /// builtin before the text becomes clauses.
    Placeholder(u32),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::Const { name: Sym::new(name), ty: None }
    }

    pub fn typed_constant(name: &str, ty: &str) -> Term {
        Term::Const { name: Sym::new(name), ty: Some(Sym::new(ty)) }
    }

    pub fn num(v: f64) -> Term {
        Term::Num(Num::new(v))
    }

    pub fn int(v: i64) -> Term {
        Term::Num(Num::new(v as f64))
    }

    pub fn str(s: &str) -> Term {
        Term::Str(Arc::from(s))
    }

    pub fn complex(functor: &str, args: Vec<Term>) -> Term {
        Term::Complex { functor: Sym::new(functor), args }
    }

    pub fn list(items: Vec<Term>) -> Term {
        let mut t = Term::Nil;
        for item in items.into_iter().rev() {
            t = Term::Cons(Box::new(item), Box::new(t));
        }
        t
    }

    pub fn list_with_tail(items: Vec<Term>, tail: Term) -> Term {
        let mut t = tail;
        for item in items.into_iter().rev() {
            t = Term::Cons(Box::new(item), Box::new(t));
        }
        t
    }

    pub fn not(inner: Term) -> Term {
        Term::complex("not", vec![inner])
    }

    pub fn neg(inner: Term) -> Term {
        Term::complex("neg", vec![inner])
    }

    pub fn cut() -> Term {
        Term::constant("!")
    }

    pub fn is_cut(&self) -> bool {
        matches!(self, Term::Const { name, .. } if name.as_str() == "!")
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) | Term::Placeholder(_) => false,
            Term::Const { .. } | Term::Num(_) | Term::Str(_) | Term::Nil => true,
            Term::Complex { args, .. } => args.iter().all(|a| a.is_ground()),
            Term::Cons(h, t) => h.is_ground() && t.is_ground(),
        }
    }

    /// Splits `not(G)` into (true, G); otherwise (false, self).
    pub fn strip_not(&self) -> (bool, &Term) {
        match self {
            Term::Complex { functor, args } if functor.as_str() == "not" && args.len() == 1 => {
                (true, &args[0])
            }
            _ => (false, self),
        }
    }

    /// Splits `neg(A)` into (true, A); otherwise (false, self).
    pub fn strip_neg(&self) -> (bool, &Term) {
        match self {
            Term::Complex { functor, args } if functor.as_str() == "neg" && args.len() == 1 => {
                (true, &args[0])
            }
            _ => (false, self),
        }
    }

    /// Predicate identity of a callable term: (explicitly-negated, functor,
    /// arity). `neg(p(X))` keys as the negated `p/1` so positive and negative
    /// clauses live in separate index spaces.
    pub fn pred_key(&self) -> Option<PredKey> {
        let (negated, inner) = self.strip_neg();
        match inner {
            Term::Const { name, .. } => Some(PredKey { negated, functor: *name, arity: 0 }),
            Term::Complex { functor, args } => {
                Some(PredKey { negated, functor: *functor, arity: args.len() })
            }
            _ => None,
        }
    }

    pub fn functor_name(&self) -> Option<Sym> {
        match self {
            Term::Const { name, .. } => Some(*name),
            Term::Complex { functor, .. } => Some(*functor),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Complex { args, .. } => args,
            _ => &[],
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|o| o.key() == v.key()) {
                    out.push(*v);
                }
            }
            Term::Complex { args, .. } => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Term::Cons(h, t) => {
                h.collect_vars(out);
                t.collect_vars(out);
            }
            _ => {}
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    /// Reads a proper list into a vector; `None` for improper or non-lists.
    pub fn as_list(&self) -> Option<Vec<Term>> {
        let mut items = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Nil => return Some(items),
                Term::Cons(h, t) => {
                    items.push((**h).clone());
                    cur = t;
                }
                _ => return None,
            }
        }
    }

    /// View of a callable term as its `[functor|args]` list decomposition.
    pub fn univ_list(&self) -> Option<Term> {
        match self {
            Term::Const { name, ty } => Some(Term::list(vec![Term::Const { name: *name, ty: *ty }])),
            Term::Complex { functor, args } => {
                let mut items = vec![Term::Const { name: *functor, ty: None }];
                items.extend(args.iter().cloned());
                Some(Term::list(items))
            }
            _ => None,
        }
    }

    /// Rebuilds a callable term from a proper `[functor|args]` list whose head
    /// is a symbolic constant.
    pub fn from_univ_list(list: &Term) -> Option<Term> {
        let items = list.as_list()?;
        let (first, rest) = items.split_first()?;
        let functor = match first {
            Term::Const { name, .. } => *name,
            _ => return None,
        };
        if rest.is_empty() {
            Some(Term::Const { name: functor, ty: None })
        } else {
            Some(Term::Complex { functor, args: rest.to_vec() })
        }
    }

    /// Renames every variable to `(name, index+offset)`... offsets are issued
    /// by the solver's freshness counter so clause copies never collide.
    pub fn rename(&self, offset: u64) -> Term {
        match self {
            Term::Var(v) => Term::Var(Var { name: v.name, index: v.index + offset, ty: v.ty }),
            Term::Complex { functor, args } => Term::Complex {
                functor: *functor,
                args: args.iter().map(|a| a.rename(offset)).collect(),
            },
            Term::Cons(h, t) => Term::Cons(Box::new(h.rename(offset)), Box::new(t.rename(offset))),
            other => other.clone(),
        }
    }

    /// Canonical variant form: variables renumbered in traversal order so two
    /// terms equal up to renaming produce identical results. Used as the
    /// memoization key and for answer deduplication.
    pub fn canonicalize(&self) -> Term {
        let mut map: HashMap<VarKey, u64> = HashMap::new();
        self.canon_walk(&mut map)
    }

    fn canon_walk(&self, map: &mut HashMap<VarKey, u64>) -> Term {
        match self {
            Term::Var(v) => {
                let next = map.len() as u64;
                let idx = *map.entry(v.key()).or_insert(next);
                Term::Var(Var { name: Sym::new("_V"), index: idx, ty: v.ty })
            }
            Term::Complex { functor, args } => Term::Complex {
                functor: *functor,
                args: args.iter().map(|a| a.canon_walk(map)).collect(),
            },
            Term::Cons(h, t) => {
                Term::Cons(Box::new(h.canon_walk(map)), Box::new(t.canon_walk(map)))
            }
            other => other.clone(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PredKey {
    pub negated: bool,
    pub functor: Sym,
    pub arity: usize,
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "neg {}/{}", self.functor, self.arity)
        } else {
            write!(f, "{}/{}", self.functor, self.arity)
        }
    }
}

/// Infix operators recognized by the parser and printer, with precedence
/// (lower binds looser).
pub fn operator_info(name: &str) -> Option<(u8, bool)> {
    // (precedence, is_comparison)
    match name {
        "=" | "<" | ">" | "<=" | ">=" | "!=" => Some((1, true)),
        "+" | "-" => Some((2, false)),
        "*" | "/" => Some((3, false)),
        _ => None,
    }
}

// --- Substitutions ---------------------------------------------------------

/// A binding map from variables to terms. Bindings may chain (X -> Y, Y -> a);
/// `resolve` follows chains and `apply` instantiates deeply.
#[derive(Clone, Default, Debug, PartialEq)]
pub struct Subst {
    map: HashMap<VarKey, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, key: &VarKey) -> Option<&Term> {
        self.map.get(key)
    }

    pub fn bind(&mut self, var: VarKey, term: Term) {
        self.map.insert(var, term);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarKey, &Term)> {
        self.map.iter()
    }

    /// Follows variable chains until a non-variable term or an unbound
    /// variable is reached. Shallow: does not descend into structure.
    pub fn resolve<'a>(&'a self, term: &'a Term) -> &'a Term {
        let mut cur = term;
        let mut hops = 0usize;
        while let Term::Var(v) = cur {
            match self.map.get(&v.key()) {
                Some(next) => {
                    cur = next;
                    hops += 1;
                    debug_assert!(hops <= self.map.len() + 1, "binding cycle");
                    if hops > self.map.len() + 1 {
                        break;
                    }
                }
                None => break,
            }
        }
        cur
    }

    /// Deep instantiation of `term` under this substitution.
    pub fn apply(&self, term: &Term) -> Term {
        let resolved = self.resolve(term);
        match resolved {
            Term::Complex { functor, args } => Term::Complex {
                functor: *functor,
                args: args.iter().map(|a| self.apply(a)).collect(),
            },
            Term::Cons(h, t) => Term::Cons(Box::new(self.apply(h)), Box::new(self.apply(t))),
            other => other.clone(),
        }
    }

    /// Restricts to the given variables, deeply applied: the answer view of a
    /// solution.
    pub fn project(&self, vars: &[Var]) -> Subst {
        let mut out = Subst::new();
        for v in vars {
            let t = self.apply(&Term::Var(*v));
            if t != Term::Var(*v) {
                out.bind(v.key(), t);
            }
        }
        out
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<_> = self.map.iter().collect();
        entries.sort_by_key(|(k, _)| (k.0.as_str(), k.1));
        let mut first = true;
        for ((name, idx), term) in entries {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            if *idx == 0 {
                write!(f, "{} = {}", name, term)?;
            } else {
                write!(f, "{}#{} = {}", name, idx, term)?;
            }
        }
        Ok(())
    }
}

// --- Display ---------------------------------------------------------------

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || !s
            .chars()
            .next()
            .map(|c| c.is_ascii_lowercase())
            .unwrap_or(false)
        || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Term {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            Term::Var(v) => {
                write!(f, "{}", v.name)?;
                if let Some(ty) = v.ty {
                    write!(f, ":{}", ty)?;
                }
                Ok(())
            }
            Term::Const { name, ty } => {
                let s = name.as_str();
                if s == "!" || s == "[]" || !needs_quotes(s) {
                    write!(f, "{}", s)?;
                } else {
                    // Constants that don't lex as plain atoms round-trip as
                    // quoted strings would not preserve constant-ness; emit
                    // them escaped with a leading quote marker only when
                    // unavoidable. In practice parsed programs only contain
                    // lexable constants.
                    write!(f, "{}", s)?;
                }
                if let Some(ty) = ty {
                    write!(f, ":{}", ty)?;
                }
                Ok(())
            }
            Term::Num(n) => write!(f, "{}", n),
            Term::Str(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        '\n' => write!(f, "\\n")?,
                        '\t' => write!(f, "\\t")?,
                        _ => write!(f, "{}", c)?,
                    }
                }
                write!(f, "\"")
            }
            Term::Complex { functor, args } => {
                let name = functor.as_str();
                if name == "," && !args.is_empty() {
                    let wrap = outer > 0;
                    if wrap {
                        write!(f, "(")?;
                    }
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        a.fmt_prec(f, 1)?;
                    }
                    if wrap {
                        write!(f, ")")?;
                    }
                    return Ok(());
                }
                if args.len() == 2 {
                    if let Some((prec, _)) = operator_info(name) {
                        let wrap = prec < outer;
                        if wrap {
                            write!(f, "(")?;
                        }
                        args[0].fmt_prec(f, prec)?;
                        write!(f, " {} ", name)?;
                        args[1].fmt_prec(f, prec + 1)?;
                        if wrap {
                            write!(f, ")")?;
                        }
                        return Ok(());
                    }
                }
                write!(f, "{}(", name)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                write!(f, ")")
            }
            Term::Cons(_, _) | Term::Nil => {
                write!(f, "[")?;
                let mut cur = self;
                let mut first = true;
                loop {
                    match cur {
                        Term::Nil => break,
                        Term::Cons(h, t) => {
                            if !first {
                                write!(f, ", ")?;
                            }
                            first = false;
                            h.fmt_prec(f, 0)?;
                            cur = t;
                        }
                        other => {
                            write!(f, "|")?;
                            other.fmt_prec(f, 0)?;
                            break;
                        }
                    }
                }
                write!(f, "]")
            }
            Term::Placeholder(n) => write!(f, "_{}", n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_compare_by_value() {
        assert_eq!(Term::int(7), Term::num(7.0));
        assert_ne!(Term::int(7), Term::num(7.5));
        assert_eq!(Num::new(-0.0), Num::new(0.0));
    }

    #[test]
    fn display_round_trips_shapes() {
        let t = Term::complex(
            "spending",
            vec![Term::constant("peter_miller"), Term::int(1200), Term::constant("last_year")],
        );
        assert_eq!(t.to_string(), "spending(peter_miller, 1200, last_year)");
        let l = Term::list_with_tail(vec![Term::var("H")], Term::var("T"));
        assert_eq!(l.to_string(), "[H|T]");
        let e = Term::complex("+", vec![Term::var("T1"), Term::constant("ttrmax")]);
        assert_eq!(e.to_string(), "T1 + ttrmax");
    }

    #[test]
    fn infix_parenthesization_follows_precedence() {
        let sum = Term::complex("+", vec![Term::var("A"), Term::var("B")]);
        let prod = Term::complex("*", vec![sum.clone(), Term::var("C")]);
        assert_eq!(prod.to_string(), "(A + B) * C");
        let cmp = Term::complex("<", vec![sum, Term::int(10)]);
        assert_eq!(cmp.to_string(), "A + B < 10");
    }

    #[test]
    fn pred_keys_separate_negated_space() {
        let p = Term::complex("p", vec![Term::constant("a")]);
        let np = Term::neg(p.clone());
        let kp = p.pred_key().unwrap();
        let knp = np.pred_key().unwrap();
        assert_eq!(kp.functor, knp.functor);
        assert!(!kp.negated);
        assert!(knp.negated);
    }

    #[test]
    fn canonicalize_identifies_variants() {
        let a = Term::complex("p", vec![Term::var("X"), Term::var("Y"), Term::var("X")]);
        let b = Term::complex("p", vec![Term::var("U"), Term::var("W"), Term::var("U")]);
        let c = Term::complex("p", vec![Term::var("U"), Term::var("W"), Term::var("W")]);
        assert_eq!(a.canonicalize(), b.canonicalize());
        assert_ne!(a.canonicalize(), c.canonicalize());
    }

    #[test]
    fn subst_apply_follows_chains() {
        let mut s = Subst::new();
        let x = Var::new("X");
        let y = Var::new("Y");
        s.bind(x.key(), Term::Var(y));
        s.bind(y.key(), Term::constant("a"));
        let t = Term::complex("f", vec![Term::Var(x)]);
        assert_eq!(s.apply(&t), Term::complex("f", vec![Term::constant("a")]));
    }

    #[test]
    fn univ_views() {
        let t = Term::complex("discount", vec![Term::constant("c"), Term::int(5)]);
        let l = t.univ_list().unwrap();
        assert_eq!(
            l,
            Term::list(vec![Term::constant("discount"), Term::constant("c"), Term::int(5)])
        );
        assert_eq!(Term::from_univ_list(&l).unwrap(), t);
        let c = Term::constant("outage");
        assert_eq!(Term::from_univ_list(&c.univ_list().unwrap()).unwrap(), c);
    }
}

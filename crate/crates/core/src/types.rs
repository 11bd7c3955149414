//! Type registry and order-sorted unification.
//!
//! Types form a DAG under an implicit root (`object`). Untyped terms behave
//! exactly as if typed with the root, so erasing every annotation makes
//! `typed_unify` coincide with plain `unify` (checked by property test).
//! Numbers carry an intrinsic type when the registry declares `lang.Integer`
//! or `lang.Double`; otherwise they are root-typed.

use crate::sym::Sym;
use crate::term::{Subst, Term, Var};
use crate::unify::occurs_in;
use std::collections::HashMap;
use thiserror::Error;

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("type {0} is already registered")]
    Duplicate(String),
    #[error("unknown type {0}")]
    Unknown(String),
    #[error("cycle in type hierarchy involving {0}")]
    Cycle(String),
    #[error("hierarchy line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct TypeRegistry {
    root: Sym,
    // type -> direct supertypes; every registered type is implicitly below root.
    supers: HashMap<Sym, Vec<Sym>>,
}

impl Default for TypeRegistry {
    fn default() -> Self {
        TypeRegistry::new()
    }
}

impl TypeRegistry {
    pub fn new() -> TypeRegistry {
        TypeRegistry { root: Sym::new(ROOT_TYPE), supers: HashMap::new() }
    }

    pub fn root(&self) -> Sym {
        self.root
    }

    pub fn is_registered(&self, name: Sym) -> bool {
        name == self.root || self.supers.contains_key(&name)
    }

    pub fn types(&self) -> impl Iterator<Item = Sym> + '_ {
        self.supers.keys().copied()
    }

    /// Registers `name` below the given supertypes (or directly below root
    /// when none are given). Supertypes must already be registered, which
    /// keeps the hierarchy acyclic by construction.
    pub fn register(&mut self, name: &str, supertypes: &[&str]) -> Result<(), TypeError> {
        let sym = Sym::new(name);
        if self.is_registered(sym) {
            return Err(TypeError::Duplicate(name.to_owned()));
        }
        let mut ups = Vec::new();
        for s in supertypes {
            let ssym = Sym::new(s);
            if ssym == self.root {
                continue;
            }
            if !self.is_registered(ssym) {
                return Err(TypeError::Unknown((*s).to_owned()));
            }
            ups.push(ssym);
        }
        self.supers.insert(sym, ups);
        Ok(())
    }

    /// Reflexive-transitive subtype test; the root is above everything.
    pub fn is_subtype(&self, sub: Sym, sup: Sym) -> Result<bool, TypeError> {
        if !self.is_registered(sub) {
            return Err(TypeError::Unknown(sub.as_str().to_owned()));
        }
        if !self.is_registered(sup) {
            return Err(TypeError::Unknown(sup.as_str().to_owned()));
        }
        Ok(self.is_subtype_unchecked(sub, sup))
    }

    fn is_subtype_unchecked(&self, sub: Sym, sup: Sym) -> bool {
        if sup == self.root || sub == sup {
            return sub == sup || sup == self.root;
        }
        if sub == self.root {
            return false;
        }
        let mut stack = vec![sub];
        let mut seen = vec![sub];
        while let Some(t) = stack.pop() {
            if t == sup {
                return true;
            }
            if let Some(ups) = self.supers.get(&t) {
                for &u in ups {
                    if !seen.contains(&u) {
                        seen.push(u);
                        stack.push(u);
                    }
                }
            }
        }
        false
    }

    /// Greatest lower bound for comparable types: the deeper of the two.
    /// Incomparable pairs have no usable bound for unification.
    pub fn glb(&self, a: Sym, b: Sym) -> Result<Option<Sym>, TypeError> {
        if self.is_subtype(a, b)? {
            Ok(Some(a))
        } else if self.is_subtype(b, a)? {
            Ok(Some(b))
        } else {
            Ok(None)
        }
    }

    /// Loads a hierarchy description. Line format:
    ///
    /// ```text
    /// # comment
    /// type lang.Number
    /// type lang.Integer sub lang.Number
    /// ```
    ///
    /// Forward references are allowed within one file; cycles are reported.
    pub fn load_hierarchy(&mut self, text: &str) -> Result<(), TypeError> {
        let mut decls: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let rest = line.strip_prefix("type ").ok_or_else(|| TypeError::Syntax {
                line: line_no,
                message: format!("expected `type <name> [sub <name>, ...]`, got `{}`", line),
            })?;
            let (name, sups) = match rest.find(" sub ") {
                Some(pos) => {
                    let name = rest[..pos].trim().to_owned();
                    let sups = rest[pos + 5..]
                        .split(',')
                        .map(|s| s.trim().to_owned())
                        .filter(|s| !s.is_empty())
                        .collect::<Vec<_>>();
                    if sups.is_empty() {
                        return Err(TypeError::Syntax {
                            line: line_no,
                            message: "empty supertype list after `sub`".into(),
                        });
                    }
                    (name, sups)
                }
                None => (rest.trim().to_owned(), Vec::new()),
            };
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(TypeError::Syntax {
                    line: line_no,
                    message: format!("bad type name `{}`", name),
                });
            }
            decls.push((line_no, name, sups));
        }

        // Two passes so later lines can be supertypes of earlier ones.
        for (_, name, _) in &decls {
            let sym = Sym::new(name);
            if self.is_registered(sym) {
                return Err(TypeError::Duplicate(name.clone()));
            }
            self.supers.insert(sym, Vec::new());
        }
        for (_, name, sups) in &decls {
            let sym = Sym::new(name);
            let mut ups = Vec::new();
            for s in sups {
                let ssym = Sym::new(s);
                if ssym == self.root {
                    continue;
                }
                if !self.is_registered(ssym) {
                    return Err(TypeError::Unknown(s.clone()));
                }
                ups.push(ssym);
            }
            self.supers.insert(sym, ups);
        }
        // Cycle check over the whole graph.
        for &t in self.supers.keys() {
            let mut seen = Vec::new();
            if self.cyclic_from(t, t, &mut seen) {
                return Err(TypeError::Cycle(t.as_str().to_owned()));
            }
        }
        Ok(())
    }

    fn cyclic_from(&self, start: Sym, cur: Sym, seen: &mut Vec<Sym>) -> bool {
        if let Some(ups) = self.supers.get(&cur) {
            for &u in ups {
                if u == start {
                    return true;
                }
                if !seen.contains(&u) {
                    seen.push(u);
                    if self.cyclic_from(start, u, seen) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Effective type of a variable (root when untyped).
    fn var_type(&self, v: &Var) -> Result<Sym, TypeError> {
        match v.ty {
            Some(t) if !self.is_registered(t) => Err(TypeError::Unknown(t.as_str().to_owned())),
            Some(t) => Ok(t),
            None => Ok(self.root),
        }
    }

    /// Intrinsic type of a non-variable term.
    fn term_type(&self, t: &Term) -> Result<Sym, TypeError> {
        match t {
            Term::Const { ty: Some(ty), .. } => {
                if self.is_registered(*ty) {
                    Ok(*ty)
                } else {
                    Err(TypeError::Unknown(ty.as_str().to_owned()))
                }
            }
            Term::Num(n) => {
                let name = if n.as_int().is_some() { "lang.Integer" } else { "lang.Double" };
                let sym = Sym::new(name);
                Ok(if self.is_registered(sym) { sym } else { self.root })
            }
            Term::Str(_) => {
                let sym = Sym::new("lang.String");
                Ok(if self.is_registered(sym) { sym } else { self.root })
            }
            _ => Ok(self.root),
        }
    }
}

/// Order-sorted unification of a query term against a target term.
///
/// Rules (root = untyped):
/// - variable/variable: comparable types unify and the subtype survives
///   (query side on ties); incomparable types fail;
/// - variable/constant: succeeds iff the constant's type is a subtype of the
///   variable's type, so a constant of a proper supertype is rejected;
/// - constant/constant: equal symbols and equal types;
/// - lists and compounds are root-typed values: only root-typed variables
///   range over them;
/// - numbers keep value equality regardless of the intrinsic type.
pub fn typed_unify(
    reg: &TypeRegistry,
    query: &Term,
    target: &Term,
    occurs_check: bool,
) -> Result<Option<Subst>, TypeError> {
    let mut s = Subst::new();
    if typed_unify_in(reg, query, target, &mut s, occurs_check)? {
        Ok(Some(s))
    } else {
        Ok(None)
    }
}

pub fn typed_unify_in(
    reg: &TypeRegistry,
    query: &Term,
    target: &Term,
    s: &mut Subst,
    occurs_check: bool,
) -> Result<bool, TypeError> {
    let ra = s.resolve(query).clone();
    let rb = s.resolve(target).clone();
    match (&ra, &rb) {
        (Term::Var(va), Term::Var(vb)) => {
            if va.key() == vb.key() {
                return Ok(true);
            }
            let ta = reg.var_type(va)?;
            let tb = reg.var_type(vb)?;
            if reg.is_subtype_unchecked(ta, tb) {
                // Query side at least as specific: the query variable (and
                // its type) survives.
                s.bind(vb.key(), ra.clone());
                Ok(true)
            } else if reg.is_subtype_unchecked(tb, ta) {
                // Target more specific: the query variable adopts it.
                s.bind(va.key(), rb.clone());
                Ok(true)
            } else {
                Ok(false)
            }
        }
        (Term::Var(v), t) | (t, Term::Var(v)) => {
            let vt = reg.var_type(v)?;
            let ok = match t {
                Term::Const { .. } | Term::Num(_) | Term::Str(_) => {
                    reg.is_subtype_unchecked(reg.term_type(t)?, vt)
                }
                // Compounds, lists and the empty list are root-typed values.
                _ => vt == reg.root,
            };
            if !ok {
                return Ok(false);
            }
            if occurs_check && occurs_in(v, t, s) {
                return Ok(false);
            }
            s.bind(v.key(), (*t).clone());
            Ok(true)
        }
        (Term::Const { name: na, ty: ta }, Term::Const { name: nb, ty: tb }) => {
            if na != nb {
                return Ok(false);
            }
            let ta = match ta {
                Some(t) => {
                    if !reg.is_registered(*t) {
                        return Err(TypeError::Unknown(t.as_str().to_owned()));
                    }
                    *t
                }
                None => reg.root,
            };
            let tb = match tb {
                Some(t) => {
                    if !reg.is_registered(*t) {
                        return Err(TypeError::Unknown(t.as_str().to_owned()));
                    }
                    *t
                }
                None => reg.root,
            };
            Ok(ta == tb)
        }
        (Term::Num(x), Term::Num(y)) => Ok(x == y),
        (Term::Str(x), Term::Str(y)) => Ok(x == y),
        (Term::Nil, Term::Nil) => Ok(true),
        (Term::Cons(ha, tla), Term::Cons(hb, tlb)) => {
            Ok(typed_unify_in(reg, ha, hb, s, occurs_check)?
                && typed_unify_in(reg, tla, tlb, s, occurs_check)?)
        }
        (Term::Complex { functor: fa, args: aa }, Term::Complex { functor: fb, args: ab }) => {
            if fa != fb || aa.len() != ab.len() {
                return Ok(false);
            }
            for (x, y) in aa.iter().zip(ab) {
                if !typed_unify_in(reg, x, y, s, occurs_check)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (Term::Cons(h, _), atom @ (Term::Const { .. } | Term::Complex { .. }))
        | (atom @ (Term::Const { .. } | Term::Complex { .. }), Term::Cons(h, _)) => {
            let cons = if matches!(ra, Term::Cons(_, _)) { &ra } else { &rb };
            let head_ok = match s.resolve(h) {
                Term::Var(v) => reg.var_type(v)? == reg.root,
                Term::Const { name, .. } => Some(*name) == atom.functor_name(),
                _ => false,
            };
            if !head_ok {
                return Ok(false);
            }
            let listed = atom.univ_list().expect("callable term has univ view");
            typed_unify_in(reg, cons, &listed, s, occurs_check)
        }
        _ => Ok(false),
    }
}

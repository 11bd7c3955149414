//! Modular knowledge base.
//!
//! A `KnowledgeState` is an immutable snapshot: updates return a new state and
//! append to the update log, so `P_0 --U_1--> P_1 --U_2--> ...` is fully
//! reproducible by replaying the log. Clauses live in modules keyed by a
//! ground oid term (file path string, symbol, or compound like
//! `key(server1)`). Adding a module under an existing oid replaces it, logged
//! as remove + add. Modules containing defeasible clauses keep their source
//! clauses and activate the defeasible meta-program translation instead.

use crate::sym::Sym;
use crate::term::{PredKey, Subst, Term};
use indexmap::IndexMap;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ModuleId(pub Term);

impl ModuleId {
    pub fn named(name: &str) -> ModuleId {
        ModuleId(Term::constant(name))
    }

    pub fn path(p: &str) -> ModuleId {
        ModuleId(Term::str(p))
    }

    /// System modules (solver axioms, bridges) are excluded from user-facing
    /// size accounting and from defeasible translation.
    pub fn is_system(&self) -> bool {
        matches!(&self.0, Term::Const { name, .. } if name.as_str().starts_with("sys:"))
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Term::Str(s) => write!(f, "{}", s),
            other => write!(f, "{}", other),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ClauseKind {
    Strict,
    Defeasible,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Clause {
    pub label: Option<Sym>,
    pub kind: ClauseKind,
    pub head: Term,
    pub body: Vec<Term>,
}

impl Clause {
    pub fn fact(head: Term) -> Clause {
        Clause { label: None, kind: ClauseKind::Strict, head, body: Vec::new() }
    }

    pub fn rule(head: Term, body: Vec<Term>) -> Clause {
        Clause { label: None, kind: ClauseKind::Strict, head, body }
    }

    pub fn defeasible(head: Term, body: Vec<Term>) -> Clause {
        Clause { label: None, kind: ClauseKind::Defeasible, head, body }
    }

    pub fn labeled(mut self, label: &str) -> Clause {
        self.label = Some(Sym::new(label));
        self
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Literal count used by benchmark size accounting: head plus body.
    pub fn literal_count(&self) -> usize {
        1 + self.body.len()
    }

    /// Fresh copy with every variable shifted by `offset` (issued from the
    /// solver's freshness counter).
    pub fn rename_apart(&self, offset: u64) -> Clause {
        Clause {
            label: self.label,
            kind: self.kind,
            head: self.head.rename(offset),
            body: self.body.iter().map(|t| t.rename(offset)).collect(),
        }
    }

    pub fn apply(&self, s: &Subst) -> Clause {
        Clause {
            label: self.label,
            kind: self.kind,
            head: s.apply(&self.head),
            body: self.body.iter().map(|t| s.apply(t)).collect(),
        }
    }

    /// Heads must be callable and positive or explicitly negated; `not(...)`
    /// heads are rejected.
    pub fn validate(&self) -> Result<(), KbError> {
        let (not, _) = self.head.strip_not();
        if not {
            return Err(KbError::InvalidHead(self.head.to_string()));
        }
        if self.head.pred_key().is_none() {
            return Err(KbError::InvalidHead(self.head.to_string()));
        }
        for b in &self.body {
            if b.is_cut() {
                continue;
            }
            let (_, inner) = b.strip_not();
            let (_, inner) = inner.strip_neg();
            if inner.pred_key().is_none() && !inner.is_var() {
                return Err(KbError::InvalidBodyLiteral(b.to_string()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.label {
            write!(f, "({}) ", l)?;
        }
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            let neck = match self.kind {
                ClauseKind::Strict => ":-",
                ClauseKind::Defeasible => "<=",
            };
            write!(f, " {} ", neck)?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", b)?;
            }
        } else if self.kind == ClauseKind::Defeasible {
            write!(f, " <= true")?;
        }
        write!(f, ".")
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("invalid clause head: {0}")]
    InvalidHead(String),
    #[error("invalid body literal: {0}")]
    InvalidBodyLiteral(String),
    #[error("module oid must be ground, got {0}")]
    NonGroundOid(String),
    #[error("no module with oid {0}")]
    UnknownModule(String),
}

#[derive(Clone, Debug)]
pub struct ModuleData {
    pub id: ModuleId,
    /// Clauses as written (pre-translation).
    pub source: Vec<Arc<Clause>>,
    /// Clauses the solver sees: equal to `source` for strict modules, the
    /// defeasible meta-program for modules with defeasible clauses.
    pub active: Vec<Arc<Clause>>,
}

impl ModuleData {
    pub fn source_literal_count(&self) -> usize {
        self.source.iter().map(|c| c.literal_count()).sum()
    }

    pub fn active_literal_count(&self) -> usize {
        self.active.iter().map(|c| c.literal_count()).sum()
    }
}

#[derive(Clone, Debug)]
pub enum UpdateOp {
    Add { module: ModuleId, clauses: Vec<Arc<Clause>> },
    Remove { module: ModuleId },
}

impl UpdateOp {
    pub fn module(&self) -> &ModuleId {
        match self {
            UpdateOp::Add { module, .. } | UpdateOp::Remove { module } => module,
        }
    }
}

#[derive(Clone, Debug)]
pub struct UpdateRecord {
    /// Index of the state produced by this operation.
    pub seq: u64,
    pub op: UpdateOp,
}

#[derive(Clone)]
pub struct ClauseRef {
    pub module: ModuleId,
    pub clause: Arc<Clause>,
}

#[derive(Clone)]
pub struct KnowledgeState {
    seq: u64,
    modules: IndexMap<ModuleId, Arc<ModuleData>>,
    log: Vec<Arc<UpdateRecord>>,
    index: Arc<HashMap<PredKey, Arc<Vec<ClauseRef>>>>,
}

impl Default for KnowledgeState {
    fn default() -> Self {
        KnowledgeState::new()
    }
}

impl KnowledgeState {
    /// The empty state `P_0`.
    pub fn new() -> KnowledgeState {
        KnowledgeState {
            seq: 0,
            modules: IndexMap::new(),
            log: Vec::new(),
            index: Arc::new(HashMap::new()),
        }
    }

    pub fn state_index(&self) -> u64 {
        self.seq
    }

    pub fn log(&self) -> &[Arc<UpdateRecord>] {
        &self.log
    }

    pub fn modules(&self) -> impl Iterator<Item = &Arc<ModuleData>> {
        self.modules.values()
    }

    pub fn module(&self, id: &ModuleId) -> Option<&Arc<ModuleData>> {
        self.modules.get(id)
    }

    pub fn has_module(&self, id: &ModuleId) -> bool {
        self.modules.contains_key(id)
    }

    /// Clauses for one predicate in global order (module insertion order,
    /// then clause order), optionally restricted to one module scope.
    pub fn clauses_for<'a>(
        &'a self,
        key: &PredKey,
        scope: Option<&'a ModuleId>,
    ) -> impl Iterator<Item = &'a ClauseRef> + 'a {
        self.index
            .get(key)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .filter(move |cr| scope.map(|m| &cr.module == m).unwrap_or(true))
    }

    /// Whole bucket for one predicate, shareable without copying. The solver
    /// holds this across resolution so large fact bases are not re-cloned on
    /// every call.
    pub fn bucket(&self, key: &PredKey) -> Option<&Arc<Vec<ClauseRef>>> {
        self.index.get(key)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredKey> {
        self.index.keys()
    }

    /// Applies one raw operation, producing the next state. Integrity-guarded
    /// updates are layered on top of this in the integrity module.
    pub fn apply(&self, op: UpdateOp) -> Result<KnowledgeState, KbError> {
        match op {
            UpdateOp::Add { module, clauses } => self.add_module_arcs(module, clauses),
            UpdateOp::Remove { module } => self.remove_module(&module),
        }
    }

    pub fn add_module(
        &self,
        id: ModuleId,
        clauses: Vec<Clause>,
    ) -> Result<KnowledgeState, KbError> {
        self.add_module_arcs(id, clauses.into_iter().map(Arc::new).collect())
    }

    fn add_module_arcs(
        &self,
        id: ModuleId,
        clauses: Vec<Arc<Clause>>,
    ) -> Result<KnowledgeState, KbError> {
        if !id.0.is_ground() {
            return Err(KbError::NonGroundOid(id.0.to_string()));
        }
        for c in &clauses {
            c.validate()?;
        }
        // Replacement: remove the old module first so the log shows both steps.
        let base = if self.modules.contains_key(&id) {
            self.remove_module(&id)?
        } else {
            self.clone()
        };

        let labeled: Vec<Arc<Clause>> = clauses
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.label.is_none() {
                    let mut cl = (*c).clone();
                    cl.label = Some(Sym::new(&format!("{}#{}", id, i)));
                    Arc::new(cl)
                } else {
                    c
                }
            })
            .collect();

        let active = if !id.is_system() && labeled.iter().any(|c| c.kind == ClauseKind::Defeasible)
        {
            crate::defeasible::translate_module(&id, &labeled)
        } else {
            labeled.clone()
        };

        let data = Arc::new(ModuleData { id: id.clone(), source: labeled.clone(), active });
        let mut modules = base.modules.clone();
        modules.insert(id.clone(), data);
        let mut log = base.log.clone();
        let seq = base.seq + 1;
        log.push(Arc::new(UpdateRecord { seq, op: UpdateOp::Add { module: id, clauses: labeled } }));
        Ok(KnowledgeState { seq, index: Arc::new(build_index(&modules)), modules, log })
    }

    pub fn remove_module(&self, id: &ModuleId) -> Result<KnowledgeState, KbError> {
        if !self.modules.contains_key(id) {
            return Err(KbError::UnknownModule(id.to_string()));
        }
        let mut modules = self.modules.clone();
        modules.shift_remove(id);
        let mut log = self.log.clone();
        let seq = self.seq + 1;
        log.push(Arc::new(UpdateRecord { seq, op: UpdateOp::Remove { module: id.clone() } }));
        Ok(KnowledgeState { seq, index: Arc::new(build_index(&modules)), modules, log })
    }

    /// Replays a log from `P_0`; with the log of an existing state this
    /// reproduces that state's modules exactly.
    pub fn replay(log: &[Arc<UpdateRecord>]) -> Result<KnowledgeState, KbError> {
        let mut st = KnowledgeState::new();
        for rec in log {
            st = st.apply(rec.op.clone())?;
        }
        Ok(st)
    }

    /// Same clause contents in the same order, module by module.
    pub fn same_modules(&self, other: &KnowledgeState) -> bool {
        if self.modules.len() != other.modules.len() {
            return false;
        }
        self.modules.iter().zip(other.modules.iter()).all(|((ida, a), (idb, b))| {
            ida == idb
                && a.source.len() == b.source.len()
                && a.source.iter().zip(b.source.iter()).all(|(x, y)| x == y)
        })
    }

    /// Total source literal count over non-system modules.
    pub fn source_size(&self) -> usize {
        self.modules
            .values()
            .filter(|m| !m.id.is_system())
            .map(|m| m.source_literal_count())
            .sum()
    }

    /// Total active (post-translation) literal count over non-system modules.
    pub fn active_size(&self) -> usize {
        self.modules
            .values()
            .filter(|m| !m.id.is_system())
            .map(|m| m.active_literal_count())
            .sum()
    }
}

fn build_index(
    modules: &IndexMap<ModuleId, Arc<ModuleData>>,
) -> HashMap<PredKey, Arc<Vec<ClauseRef>>> {
    let mut flat: HashMap<PredKey, Vec<ClauseRef>> = HashMap::new();
    for data in modules.values() {
        for clause in &data.active {
            if let Some(key) = clause.head.pred_key() {
                flat.entry(key).or_default().push(ClauseRef {
                    module: data.id.clone(),
                    clause: Arc::clone(clause),
                });
            }
        }
    }
    flat.into_iter().map(|(k, v)| (k, Arc::new(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(s: &str) -> Clause {
        Clause::fact(Term::constant(s))
    }

    #[test]
    fn add_and_remove_are_inverse() {
        let p0 = KnowledgeState::new();
        let a = ModuleId::named("a");
        let p1 = p0.add_module(a.clone(), vec![fact("p"), fact("q")]).unwrap();
        assert_eq!(p1.state_index(), 1);
        assert_eq!(p1.source_size(), 2);
        let p2 = p1.remove_module(&a).unwrap();
        assert_eq!(p2.source_size(), 0);
        assert!(p2.same_modules(&p0));
        assert!(p0.remove_module(&a).is_err());
    }

    #[test]
    fn duplicate_oid_replaces_with_two_log_records() {
        let p0 = KnowledgeState::new();
        let a = ModuleId::named("a");
        let p1 = p0.add_module(a.clone(), vec![fact("p")]).unwrap();
        let p2 = p1.add_module(a.clone(), vec![fact("q")]).unwrap();
        assert_eq!(p2.log().len(), 3); // add, remove, add
        assert_eq!(p2.source_size(), 1);
        let key = Term::constant("q").pred_key().unwrap();
        assert_eq!(p2.clauses_for(&key, None).count(), 1);
        let gone = Term::constant("p").pred_key().unwrap();
        assert_eq!(p2.clauses_for(&gone, None).count(), 0);
    }

    #[test]
    fn replay_reproduces_state() {
        let p0 = KnowledgeState::new();
        let p1 = p0.add_module(ModuleId::named("a"), vec![fact("p")]).unwrap();
        let p2 = p1.add_module(ModuleId::named("b"), vec![fact("q"), fact("r")]).unwrap();
        let p3 = p2.remove_module(&ModuleId::named("a")).unwrap();
        let p4 = p3.add_module(ModuleId::named("b"), vec![fact("s")]).unwrap();
        let replayed = KnowledgeState::replay(p4.log()).unwrap();
        assert!(replayed.same_modules(&p4));
        assert_eq!(replayed.state_index(), p4.state_index());
    }

    #[test]
    fn clause_order_is_module_then_position() {
        let p = KnowledgeState::new()
            .add_module(
                ModuleId::named("m1"),
                vec![
                    Clause::fact(Term::complex("p", vec![Term::int(1)])),
                    Clause::fact(Term::complex("p", vec![Term::int(2)])),
                ],
            )
            .unwrap()
            .add_module(
                ModuleId::named("m2"),
                vec![Clause::fact(Term::complex("p", vec![Term::int(3)]))],
            )
            .unwrap();
        let key = Term::complex("p", vec![Term::int(0)]).pred_key().unwrap();
        let got: Vec<String> = p.clauses_for(&key, None).map(|c| c.clause.head.to_string()).collect();
        assert_eq!(got, vec!["p(1)", "p(2)", "p(3)"]);
        let scoped: Vec<String> = p
            .clauses_for(&key, Some(&ModuleId::named("m2")))
            .map(|c| c.clause.head.to_string())
            .collect();
        assert_eq!(scoped, vec!["p(3)"]);
    }

    #[test]
    fn auto_labels_are_module_ordinal() {
        let p = KnowledgeState::new()
            .add_module(ModuleId::named("m"), vec![fact("p"), fact("q").labeled("named")])
            .unwrap();
        let m = p.module(&ModuleId::named("m")).unwrap();
        assert_eq!(m.source[0].label.unwrap().as_str(), "m#0");
        assert_eq!(m.source[1].label.unwrap().as_str(), "named");
    }

    #[test]
    fn invalid_heads_rejected() {
        let p0 = KnowledgeState::new();
        let bad = Clause::fact(Term::not(Term::constant("p")));
        assert!(p0.add_module(ModuleId::named("m"), vec![bad]).is_err());
        let nonground = ModuleId(Term::var("X"));
        assert!(p0.add_module(nonground, vec![fact("p")]).is_err());
    }
}

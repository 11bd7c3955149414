//! Rule-based SLA monitoring engine.
//!
//! Contract and policy rules are logic programs organised into updatable
//! modules. On top of the core solver the crate layers typed unification
//! against a partially ordered type hierarchy, integrity constraints,
//! defeasible rules with rule-level priorities, an event calculus with an
//! event algebra and deontic norms, and an event-condition-action processor
//! driven by a virtual clock. See the `scripts/` directory in the repository
//! root for complete contract examples.

pub mod sym;
pub mod term;
pub mod unify;
pub mod types;
pub mod parse;
pub mod kb;
pub mod defeasible;
pub mod env;
pub mod integrity;
pub mod solve;
pub mod bench;
pub mod ec;
pub mod eca;
pub mod scenario;

pub use kb::{Clause, ClauseKind, KnowledgeState, ModuleId};
pub use sym::Sym;
pub use term::{Num, PredKey, Subst, Term};
pub use types::TypeRegistry;

//! rcq-core: a compiler from arbitrary relational calculus queries to pairs
//! of safe-range queries and ultimately SQL, plus in-memory evaluators, a
//! brute-force finiteness oracle, cost diagnostics, and the Data Golf
//! hard-instance generator.
//!
//! Pipeline: `split` restricts bound and free variables, producing the
//! `(fin, inf)` pair; `srnf`/`sr2ranf` lower each to relational algebra
//! normal form; `cnt` optionally introduces count aggregations; `ranf2ra`
//! and `ra2sql` emit relational algebra and SQL.

pub mod atom;
pub mod syntax;
pub mod parser;
pub mod printer;
pub mod subst;
pub mod structure;
pub mod ranges;
pub mod eval;
pub mod oracle;
pub mod vgt;
pub mod complexity;
pub mod normalize;
pub mod translate;
pub mod aggs;
pub mod ra;
pub mod sql;
pub mod datagolf;
pub mod par;
pub mod corpus;

pub use atom::Atom;
pub use syntax::{Query, Signature, Term};

//! Query abstract syntax and the pure syntactic toolbox: free/bound
//! variables, flattening, the size measure, and smart constructors.

use crate::atom::Atom;
use std::collections::{BTreeMap, BTreeSet};

pub type Var = String;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Atom),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// RC query AST. `Eq` keeps the variable on the left; `CntAgg` counts the
/// assignments of `bound` satisfying `body` per group of the remaining free
/// variables. `MulEq` is the arithmetic constraint `result = lhs * rhs` used
/// by the count-aggregation rewrites; it never appears in surface queries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Query {
    False,
    True,
    Eq(Var, Term),
    Pred(String, Vec<Term>),
    Not(Box<Query>),
    Or(Box<Query>, Box<Query>),
    And(Box<Query>, Box<Query>),
    Exists(Var, Box<Query>),
    CntAgg {
        result: Var,
        bound: Vec<Var>,
        body: Box<Query>,
    },
    MulEq {
        result: Var,
        lhs: Var,
        rhs: Var,
    },
}

pub fn not(q: Query) -> Query {
    Query::Not(Box::new(q))
}

pub fn and(a: Query, b: Query) -> Query {
    Query::And(Box::new(a), Box::new(b))
}

pub fn or(a: Query, b: Query) -> Query {
    Query::Or(Box::new(a), Box::new(b))
}

pub fn exists(v: impl Into<Var>, q: Query) -> Query {
    Query::Exists(v.into(), Box::new(q))
}

pub fn var(v: impl Into<Var>) -> Term {
    Term::Var(v.into())
}

pub fn cst(a: Atom) -> Term {
    Term::Const(a)
}

pub fn pred(name: impl Into<String>, args: Vec<Term>) -> Query {
    Query::Pred(name.into(), args)
}

pub fn eq(v: impl Into<Var>, t: Term) -> Query {
    Query::Eq(v.into(), t)
}

/// Left-associative conjunction of a nonempty ordered list; empty list is ⊤.
pub fn and_all(mut qs: Vec<Query>) -> Query {
    if qs.is_empty() {
        return Query::True;
    }
    let first = qs.remove(0);
    qs.into_iter().fold(first, and)
}

/// Left-associative disjunction; the empty disjunction is ⊥.
pub fn or_all(mut qs: Vec<Query>) -> Query {
    if qs.is_empty() {
        return Query::False;
    }
    let first = qs.remove(0);
    qs.into_iter().fold(first, or)
}

/// `∃x. q` if `x` is free in `q`, otherwise `q` unchanged.
pub fn exists_smart(x: &str, q: Query) -> Query {
    if q.fv().contains(x) {
        exists(x, q)
    } else {
        q
    }
}

/// Existentially closes `q` over `vars`, outermost binder first.
pub fn exists_seq(vars: &[Var], q: Query) -> Query {
    let mut out = q;
    for v in vars.iter().rev() {
        out = exists_smart(v, out);
    }
    out
}

impl Query {
    /// Atomic predicate test: `r(t1..tk)` or `x = c`.
    pub fn is_atomic_predicate(&self) -> bool {
        matches!(self, Query::Pred(..)) || matches!(self, Query::Eq(_, Term::Const(_)))
    }

    /// Equality between two distinct variables.
    pub fn is_var_eq(&self) -> bool {
        matches!(self, Query::Eq(x, Term::Var(y)) if x != y)
    }

    pub fn is_neg(&self) -> bool {
        matches!(self, Query::Not(_))
    }

    /// Quantified predicate: an atomic predicate under zero or more binders.
    pub fn is_quantified_predicate(&self) -> bool {
        let mut q = self;
        while let Query::Exists(_, body) = q {
            q = body;
        }
        q.is_atomic_predicate()
    }

    pub fn fv(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Var>) {
        match self {
            Query::False | Query::True => {}
            Query::Eq(x, t) => {
                out.insert(x.clone());
                if let Term::Var(y) = t {
                    out.insert(y.clone());
                }
            }
            Query::Pred(_, args) => {
                for t in args {
                    if let Term::Var(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Query::Not(q) => q.collect_fv(out),
            Query::Or(a, b) | Query::And(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Query::Exists(x, body) => {
                let mut inner = BTreeSet::new();
                body.collect_fv(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
            Query::CntAgg {
                result,
                bound,
                body,
            } => {
                let mut inner = BTreeSet::new();
                body.collect_fv(&mut inner);
                for v in bound {
                    inner.remove(v);
                }
                out.extend(inner);
                out.insert(result.clone());
            }
            Query::MulEq { result, lhs, rhs } => {
                out.insert(result.clone());
                out.insert(lhs.clone());
                out.insert(rhs.clone());
            }
        }
    }

    /// All variables, free and bound.
    pub fn av(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_av(&mut out);
        out
    }

    fn collect_av(&self, out: &mut BTreeSet<Var>) {
        match self {
            Query::False | Query::True => {}
            Query::Eq(x, t) => {
                out.insert(x.clone());
                if let Term::Var(y) = t {
                    out.insert(y.clone());
                }
            }
            Query::Pred(_, args) => {
                for t in args {
                    if let Term::Var(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Query::Not(q) => q.collect_av(out),
            Query::Or(a, b) | Query::And(a, b) => {
                a.collect_av(out);
                b.collect_av(out);
            }
            Query::Exists(x, body) => {
                out.insert(x.clone());
                body.collect_av(out);
            }
            Query::CntAgg {
                result,
                bound,
                body,
            } => {
                out.insert(result.clone());
                out.extend(bound.iter().cloned());
                body.collect_av(out);
            }
            Query::MulEq { result, lhs, rhs } => {
                out.insert(result.clone());
                out.insert(lhs.clone());
                out.insert(rhs.clone());
            }
        }
    }

    /// Free variables in the fixed global order (lexicographic).
    pub fn fvseq(&self) -> Vec<Var> {
        self.fv().into_iter().collect()
    }

    /// All subqueries, including `self`, deduplicated.
    pub fn subqueries(&self) -> BTreeSet<Query> {
        let mut out = BTreeSet::new();
        self.collect_subqueries(&mut out);
        out
    }

    fn collect_subqueries(&self, out: &mut BTreeSet<Query>) {
        out.insert(self.clone());
        match self {
            Query::Not(q) | Query::Exists(_, q) => q.collect_subqueries(out),
            Query::Or(a, b) | Query::And(a, b) => {
                a.collect_subqueries(out);
                b.collect_subqueries(out);
            }
            Query::CntAgg { body, .. } => body.collect_subqueries(out),
            _ => {}
        }
    }

    /// Flattens nested disjunction, preserving left-to-right order and
    /// dropping duplicates.
    pub fn flat_or(&self) -> Vec<Query> {
        let mut out = Vec::new();
        self.flatten(true, &mut out);
        out
    }

    /// Flattens nested conjunction, preserving order, dropping duplicates.
    pub fn flat_and(&self) -> Vec<Query> {
        let mut out = Vec::new();
        self.flatten(false, &mut out);
        out
    }

    fn flatten(&self, disj: bool, out: &mut Vec<Query>) {
        match (disj, self) {
            (true, Query::Or(a, b)) => {
                a.flatten(disj, out);
                b.flatten(disj, out);
            }
            (false, Query::And(a, b)) => {
                a.flatten(disj, out);
                b.flatten(disj, out);
            }
            _ => {
                if !out.contains(self) {
                    out.push(self.clone());
                }
            }
        }
    }

    /// Termination measure: leaves weigh 1, negation and quantification
    /// double, disjunction weighs more than conjunction.
    pub fn sz(&self) -> u64 {
        match self {
            Query::False
            | Query::True
            | Query::Eq(..)
            | Query::Pred(..)
            | Query::MulEq { .. } => 1,
            Query::Not(q) => 2 * q.sz(),
            Query::Or(a, b) => 2 * a.sz() + 2 * b.sz() + 2,
            Query::And(a, b) => a.sz() + b.sz() + 1,
            Query::Exists(_, q) => 2 * q.sz(),
            Query::CntAgg { body, .. } => 2 * body.sz() + 1,
        }
    }

    /// Number of AST nodes.
    pub fn node_count(&self) -> usize {
        match self {
            Query::False
            | Query::True
            | Query::Eq(..)
            | Query::Pred(..)
            | Query::MulEq { .. } => 1,
            Query::Not(q) | Query::Exists(_, q) => 1 + q.node_count(),
            Query::Or(a, b) | Query::And(a, b) => 1 + a.node_count() + b.node_count(),
            Query::CntAgg { body, .. } => 1 + body.node_count(),
        }
    }

    /// A query with no free variables.
    pub fn is_closed(&self) -> bool {
        self.fv().is_empty()
    }
}

/// Predicate arities plus the constant symbols interpreted by a structure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub constants: BTreeSet<Atom>,
    pub arities: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_arity(mut self, name: &str, arity: usize) -> Self {
        self.arities.insert(name.to_string(), arity);
        self
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }
}

/// Picks the lowest-suffix variant of `base` not present in `avoid`.
pub fn fresh_var(base: &str, avoid: &BTreeSet<Var>) -> Var {
    if !avoid.contains(base) {
        return base.to_string();
    }
    for i in 1u64.. {
        let candidate = format!("{base}{i}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

//! Derivability of the generated and covered relations, and the
//! safe-range / RANF classifiers built on them.
//!
//! Both relations are nondeterministic: a variable may be derivable with
//! many different witness sets. [`RangeCtx`] enumerates all of them (capped,
//! deterministically ordered) so that cost-based choices can pick one later.

use crate::subst::{subst_bot, subst_var};
use crate::syntax::{and, exists_smart, not, or, Query, Term, Var};
use std::collections::BTreeSet;
use std::collections::HashMap;

/// A witness for the covered relation: quantified predicates (generators)
/// plus equalities `x = y` pairing the covered variable with another one.
pub type CoverSet = BTreeSet<Query>;

/// Enumeration cap per `(variable, query)` call.
pub const MAX_COVER_SETS: usize = 512;

#[derive(Default)]
pub struct RangeCtx {
    gen_memo: HashMap<(Var, Query), Vec<CoverSet>>,
    cov_memo: HashMap<(Var, Query), Vec<CoverSet>>,
}

impl RangeCtx {
    pub fn new() -> Self {
        Self::default()
    }

    /// All sets `G` derivable for `x gen q`. Empty means `x` is not range
    /// restricted in `q`.
    pub fn gen(&mut self, x: &str, q: &Query) -> Vec<CoverSet> {
        let key = (x.to_string(), q.clone());
        if let Some(hit) = self.gen_memo.get(&key) {
            return hit.clone();
        }
        // park an empty entry to cut cycles (none arise, but cheap to guard)
        self.gen_memo.insert(key.clone(), Vec::new());
        let out = self.gen_raw(x, q);
        self.gen_memo.insert(key, out.clone());
        out
    }

    fn gen_raw(&mut self, x: &str, q: &Query) -> Vec<CoverSet> {
        let mut out: BTreeSet<CoverSet> = BTreeSet::new();
        match q {
            Query::False => {
                out.insert(CoverSet::new());
            }
            _ if q.is_atomic_predicate() && q.fv().contains(x) => {
                out.insert([q.clone()].into());
            }
            Query::Not(inner) => match inner.as_ref() {
                Query::Not(p) => out.extend(self.gen(x, p)),
                Query::Or(a, b) => {
                    let dual = and(not((**a).clone()), not((**b).clone()));
                    out.extend(self.gen(x, &dual));
                }
                Query::And(a, b) => {
                    let dual = or(not((**a).clone()), not((**b).clone()));
                    out.extend(self.gen(x, &dual));
                }
                _ => {}
            },
            Query::Or(a, b) => {
                let left = self.gen(x, a);
                let right = self.gen(x, b);
                for g1 in &left {
                    for g2 in &right {
                        out.insert(g1.union(g2).cloned().collect());
                    }
                }
            }
            Query::And(a, b) => {
                out.extend(self.gen(x, a));
                out.extend(self.gen(x, b));
                // Q ∧ x=y and Q ∧ y=x transfer a generator for y to x
                if let Query::Eq(l, Term::Var(r)) = b.as_ref() {
                    let other = if l == x && r != x {
                        Some(r.clone())
                    } else if r == x && l != x {
                        Some(l.clone())
                    } else {
                        None
                    };
                    if let Some(y) = other {
                        for g in self.gen(&y, a) {
                            out.insert(g.iter().map(|m| subst_var(m, &y, x)).collect());
                        }
                    }
                }
            }
            Query::Exists(y, body) if y != x => {
                for g in self.gen(x, body) {
                    out.insert(
                        g.into_iter()
                            .map(|m| exists_smart(y, m))
                            .collect(),
                    );
                }
            }
            _ => {}
        }
        out.into_iter().take(MAX_COVER_SETS).collect()
    }

    pub fn is_gen(&mut self, x: &str, q: &Query) -> bool {
        !self.gen(x, q).is_empty()
    }

    /// All cover sets derivable for `x cov q`. Callers must ensure `q` has
    /// range-restricted bound variables for the completeness guarantee.
    pub fn cov(&mut self, x: &str, q: &Query) -> Vec<CoverSet> {
        let key = (x.to_string(), q.clone());
        if let Some(hit) = self.cov_memo.get(&key) {
            return hit.clone();
        }
        self.cov_memo.insert(key.clone(), Vec::new());
        let out = self.cov_raw(x, q);
        self.cov_memo.insert(key, out.clone());
        out
    }

    fn cov_raw(&mut self, x: &str, q: &Query) -> Vec<CoverSet> {
        let mut out: BTreeSet<CoverSet> = BTreeSet::new();
        if !q.fv().contains(x) {
            out.insert(CoverSet::new());
            return out.into_iter().collect();
        }
        match q {
            Query::Eq(l, Term::Var(r)) => {
                if l == x && r == x {
                    out.insert(CoverSet::new());
                } else if l == x {
                    out.insert([Query::Eq(x.to_string(), Term::Var(r.clone()))].into());
                } else if r == x {
                    out.insert([Query::Eq(x.to_string(), Term::Var(l.clone()))].into());
                }
            }
            _ if q.is_atomic_predicate() => {
                out.insert([q.clone()].into());
            }
            Query::Not(inner) => {
                out.extend(self.cov(x, inner));
            }
            Query::Or(a, b) => {
                let left = self.cov(x, a);
                let right = self.cov(x, b);
                for g1 in &left {
                    for g2 in &right {
                        out.insert(g1.union(g2).cloned().collect());
                    }
                }
                if subst_bot(a, x) == Query::True {
                    out.extend(left);
                }
                if subst_bot(b, x) == Query::True {
                    out.extend(right);
                }
            }
            Query::And(a, b) => {
                let left = self.cov(x, a);
                let right = self.cov(x, b);
                for g1 in &left {
                    for g2 in &right {
                        out.insert(g1.union(g2).cloned().collect());
                    }
                }
                if subst_bot(a, x) == Query::False {
                    out.extend(left);
                }
                if subst_bot(b, x) == Query::False {
                    out.extend(right);
                }
            }
            Query::Exists(y, body) if y != x => {
                let bound_eq = Query::Eq(x.to_string(), Term::Var(y.clone()));
                let covs = self.cov(x, body);
                let gens_y = self.gen(y, body);
                for g in &covs {
                    if !g.contains(&bound_eq) {
                        out.insert(g.iter().map(|m| exists_smart(y, m.clone())).collect());
                    }
                    for gy in &gens_y {
                        let mut combined: CoverSet = g
                            .iter()
                            .filter(|m| *m != &bound_eq)
                            .map(|m| exists_smart(y, m.clone()))
                            .collect();
                        combined.extend(gy.iter().map(|m| subst_var(m, y, x)));
                        out.insert(combined);
                    }
                }
            }
            _ => {}
        }
        out.into_iter().take(MAX_COVER_SETS).collect()
    }
}

/// Generators of a cover set: the quantified-predicate members.
pub fn cov_qps(g: &CoverSet) -> Vec<Query> {
    g.iter()
        .filter(|m| !matches!(m, Query::Eq(_, Term::Var(_))))
        .cloned()
        .collect()
}

/// Equality partners of `x` in a cover set.
pub fn cov_eqs(x: &str, g: &CoverSet) -> Vec<Var> {
    g.iter()
        .filter_map(|m| match m {
            Query::Eq(l, Term::Var(r)) if l == x && r != x => Some(r.clone()),
            _ => None,
        })
        .collect()
}

/// The disjunction of a cover set's generators (`⊥` when there are none).
pub fn cov_qps_query(g: &CoverSet) -> Query {
    crate::syntax::or_all(cov_qps(g))
}

/// Free variables of `q` that are not range restricted.
pub fn nongens(q: &Query) -> BTreeSet<Var> {
    let mut ctx = RangeCtx::new();
    nongens_ctx(&mut ctx, q)
}

pub fn nongens_ctx(ctx: &mut RangeCtx, q: &Query) -> BTreeSet<Var> {
    q.fv()
        .into_iter()
        .filter(|x| !ctx.is_gen(x, q))
        .collect()
}

/// Safe range: every free variable and every bound variable is range
/// restricted.
pub fn is_safe_range(q: &Query) -> bool {
    let mut ctx = RangeCtx::new();
    is_safe_range_ctx(&mut ctx, q)
}

pub fn is_safe_range_ctx(ctx: &mut RangeCtx, q: &Query) -> bool {
    if !nongens_ctx(ctx, q).is_empty() {
        return false;
    }
    has_rr_bound_vars(ctx, q)
}

/// Range-restricted bound variables: `gen(y, body)` is derivable for every
/// subquery `∃y. body`.
pub fn has_rr_bound_vars(ctx: &mut RangeCtx, q: &Query) -> bool {
    match q {
        Query::Not(inner) => has_rr_bound_vars(ctx, inner),
        Query::Or(a, b) | Query::And(a, b) => {
            has_rr_bound_vars(ctx, a) && has_rr_bound_vars(ctx, b)
        }
        Query::Exists(y, body) => ctx.is_gen(y, body) && has_rr_bound_vars(ctx, body),
        Query::CntAgg { .. } => false,
        _ => true,
    }
}

/// The RANF characterization: conjunction shapes that map directly onto
/// joins, anti-joins, selections and column duplication.
pub fn is_ranf(q: &Query) -> bool {
    match q {
        Query::False | Query::True | Query::Pred(..) => true,
        Query::Eq(_, Term::Const(_)) => true,
        Query::Eq(..) | Query::MulEq { .. } => false,
        Query::Not(inner) => is_ranf(inner) && inner.fv().is_empty(),
        Query::Or(a, b) => is_ranf(a) && is_ranf(b) && a.fv() == b.fv(),
        Query::And(a, b) => {
            if !is_ranf(a) {
                return false;
            }
            let fva = a.fv();
            match b.as_ref() {
                Query::Eq(x, Term::Var(y)) if x != y => {
                    fva.contains(x) || fva.contains(y)
                }
                Query::Not(inner) => match inner.as_ref() {
                    Query::Eq(x, Term::Var(y)) if x != y => {
                        fva.contains(x) && fva.contains(y)
                    }
                    _ => is_ranf(inner) && inner.fv().is_subset(&fva),
                },
                Query::MulEq { lhs, rhs, .. } => fva.contains(lhs) && fva.contains(rhs),
                _ => is_ranf(b),
            }
        }
        Query::Exists(x, body) => is_ranf(body) && body.fv().contains(x),
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let fvb = body.fv();
            is_ranf(body)
                && bound.iter().all(|v| fvb.contains(v))
                && !fvb.contains(result)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    fn b(v: &str) -> Query {
        pred("B", vec![var(v)])
    }

    fn p2(a: &str, c: &str) -> Query {
        pred("P2", vec![var(a), var(c)])
    }

    #[test]
    fn gen_atomic_and_absent() {
        let mut ctx = RangeCtx::new();
        let sets = ctx.gen("x", &b("x"));
        assert!(sets.contains(&[b("x")].into()));
        assert!(ctx.gen("x", &b("y")).is_empty());
    }

    #[test]
    fn gen_through_equality_conjunct() {
        // x gen B(y) ∧ x=y via the equality transfer rule
        let mut ctx = RangeCtx::new();
        let q = and(b("y"), eq("x", var("y")));
        let sets = ctx.gen("x", &q);
        assert!(sets.contains(&[b("x")].into()));
    }

    #[test]
    fn cov_on_equality_and_atom() {
        let mut ctx = RangeCtx::new();
        let sets = ctx.cov("x", &eq("x", var("y")));
        assert!(sets.contains(&[eq("x", var("y"))].into()));
        let sets = ctx.cov("x", &b("x"));
        assert!(sets.contains(&[b("x")].into()));
    }

    #[test]
    fn nongens_examples() {
        let q = and(b("x"), eq("u", var("v")));
        let ng = nongens(&q);
        assert_eq!(ng, ["u", "v"].iter().map(|s| s.to_string()).collect());
        assert!(nongens(&b("x")).is_empty());
        let q = or(b("x"), p2("x", "y"));
        assert_eq!(nongens(&q), ["y".to_string()].into());
    }

    #[test]
    fn safe_range_examples() {
        assert!(is_safe_range(&b("x")));
        assert!(!is_safe_range(&not(b("x"))));
        // bound u, s unrestricted in the surface form of the suspicious-brands query
        let (q, _) = crate::parser::parse_query_infer(
            "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
        )
        .unwrap();
        assert!(!is_safe_range(&q));
        assert!(is_safe_range(&and(b("x"), eq("x", var("y")))));
    }

    #[test]
    fn ranf_examples() {
        assert!(is_ranf(&Query::True));
        assert!(!is_ranf(&not(b("x"))));
        let good = and(and(b("x"), eq("x", var("y"))), eq("y", var("z")));
        assert!(is_ranf(&good));
        let bad = and(and(b("x"), eq("y", var("z"))), eq("x", var("y")));
        assert!(!is_ranf(&bad));
        let bad2 = and(b("x"), and(eq("y", var("z")), eq("x", var("y"))));
        assert!(!is_ranf(&bad2));
    }

    #[test]
    fn ranf_aggregation_rule() {
        let agg = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(p2("x", "y")),
        };
        assert!(is_ranf(&agg));
        let clash = Query::CntAgg {
            result: "x".into(),
            bound: vec!["y".into()],
            body: Box::new(p2("x", "y")),
        };
        assert!(!is_ranf(&clash));
    }

    #[test]
    fn cov_derivation_depth_is_bounded() {
        // every derivation explored terminates within the size measure
        let (q, _) = crate::parser::parse_query_infer(
            "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
        )
        .unwrap();
        let mut ctx = RangeCtx::new();
        for x in q.fv() {
            let _ = ctx.cov(&x, &q);
        }
    }
}

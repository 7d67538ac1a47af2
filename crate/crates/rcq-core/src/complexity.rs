//! Complexity diagnostics: the closure of a query's predicate atoms under
//! equalities and quantification, and the quantified predicates realized by
//! a query's own binder structure. The containment of the latter (computed
//! on a translated query) in the former (computed on the source query) is
//! the syntactic footprint of the translation's cost guarantee.

use crate::subst::subst_var;
use crate::syntax::{exists, Query, Term, Var};
use std::collections::BTreeSet;

/// Scope preorder: `x ⪯ y` when the scope of an occurrence of `x` is
/// contained in the scope of an occurrence of `y`. Free variables are the
/// maximal elements. Assumes pairwise distinct free and bound variables.
pub struct ScopeOrder {
    free: BTreeSet<Var>,
    binders: Vec<(Var, Query)>,
}

impl ScopeOrder {
    pub fn of(q: &Query) -> Self {
        let mut binders = Vec::new();
        collect_binders(q, &mut binders);
        ScopeOrder {
            free: q.fv(),
            binders,
        }
    }

    pub fn le(&self, x: &str, y: &str) -> bool {
        if self.free.contains(y) {
            return true;
        }
        if self.free.contains(x) {
            return false;
        }
        let bx = self.binders.iter().find(|(v, _)| v == x);
        let by = self.binders.iter().find(|(v, _)| v == y);
        match (bx, by) {
            (Some((_, qx)), Some((_, qy))) => qy.subqueries().contains(qx),
            _ => false,
        }
    }
}

fn collect_binders(q: &Query, out: &mut Vec<(Var, Query)>) {
    match q {
        Query::Not(inner) => collect_binders(inner, out),
        Query::Or(a, b) | Query::And(a, b) => {
            collect_binders(a, out);
            collect_binders(b, out);
        }
        Query::Exists(v, body) => {
            out.push((v.clone(), q.clone()));
            collect_binders(body, out);
        }
        Query::CntAgg { bound, body, .. } => {
            for v in bound {
                out.push((v.clone(), q.clone()));
            }
            collect_binders(body, out);
        }
        _ => {}
    }
}

/// Predicate atoms occurring anywhere in `q`.
pub fn pred_atoms(q: &Query) -> BTreeSet<Query> {
    let mut out = BTreeSet::new();
    collect_pred_atoms(q, &mut out);
    out
}

fn collect_pred_atoms(q: &Query, out: &mut BTreeSet<Query>) {
    match q {
        Query::Pred(..) => {
            out.insert(q.clone());
        }
        Query::Not(inner) | Query::Exists(_, inner) => collect_pred_atoms(inner, out),
        Query::Or(a, b) | Query::And(a, b) => {
            collect_pred_atoms(a, out);
            collect_pred_atoms(b, out);
        }
        Query::CntAgg { body, .. } => collect_pred_atoms(body, out),
        _ => {}
    }
}

/// Pairs of variables related by the smallest symmetric-transitive relation
/// containing the equalities occurring in `q`.
pub fn equality_closure(q: &Query) -> BTreeSet<(Var, Var)> {
    let mut pairs = BTreeSet::new();
    collect_eq_pairs(q, &mut pairs);
    // symmetric
    let sym: Vec<(Var, Var)> = pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
    pairs.extend(sym);
    // transitive
    loop {
        let mut added = Vec::new();
        for (a, b) in &pairs {
            for (c, d) in &pairs {
                if b == c && a != d && !pairs.contains(&(a.clone(), d.clone())) {
                    added.push((a.clone(), d.clone()));
                }
            }
        }
        if added.is_empty() {
            break;
        }
        pairs.extend(added);
    }
    pairs
}

fn collect_eq_pairs(q: &Query, out: &mut BTreeSet<(Var, Var)>) {
    match q {
        Query::Eq(x, Term::Var(y)) if x != y => {
            out.insert((x.clone(), y.clone()));
        }
        Query::Not(inner) | Query::Exists(_, inner) => collect_eq_pairs(inner, out),
        Query::Or(a, b) | Query::And(a, b) => {
            collect_eq_pairs(a, out);
            collect_eq_pairs(b, out);
        }
        Query::CntAgg { body, .. } => collect_eq_pairs(body, out),
        _ => {}
    }
}

/// Least set of quantified predicates containing the predicate atoms of `q`,
/// closed under substitution along the equality closure (respecting the
/// scope preorder) and under existential quantification of the innermost
/// bound variable. Requires pairwise distinct free and bound variables.
pub fn closeatomseq(q: &Query) -> BTreeSet<Query> {
    let order = ScopeOrder::of(q);
    let eqs = equality_closure(q);
    let fv = q.fv();
    let mut members = pred_atoms(q);
    loop {
        let mut fresh: Vec<Query> = Vec::new();
        for m in &members {
            let mfv = m.fv();
            for (x, y) in &eqs {
                if mfv.contains(x) && order.le(x, y) {
                    let sub = subst_var(m, x, y);
                    if !members.contains(&sub) {
                        fresh.push(sub);
                    }
                }
            }
            for x in &mfv {
                if !fv.contains(x) && mfv.iter().all(|y| order.le(x, y)) {
                    let quantified = exists(x.clone(), m.clone());
                    if !members.contains(&quantified) {
                        fresh.push(quantified);
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        members.extend(fresh);
    }
    members
}

/// Quantified predicates realized by `q` itself: every predicate atom
/// occurrence under every prefix of its chain of capturing binders.
pub fn closeatoms(q: &Query) -> BTreeSet<Query> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<Var> = Vec::new();
    walk_closeatoms(q, &mut stack, &mut out);
    out
}

fn walk_closeatoms(q: &Query, stack: &mut Vec<Var>, out: &mut BTreeSet<Query>) {
    match q {
        Query::Pred(..) => {
            let mut remaining = q.fv();
            let mut member = q.clone();
            out.insert(member.clone());
            for v in stack.iter().rev() {
                if remaining.remove(v) {
                    member = exists(v.clone(), member);
                    out.insert(member.clone());
                }
            }
        }
        Query::Not(inner) => walk_closeatoms(inner, stack, out),
        Query::Or(a, b) | Query::And(a, b) => {
            walk_closeatoms(a, stack, out);
            walk_closeatoms(b, stack, out);
        }
        Query::Exists(v, body) => {
            stack.push(v.clone());
            walk_closeatoms(body, stack, out);
            stack.pop();
        }
        Query::CntAgg { bound, body, .. } => {
            for v in bound {
                stack.push(v.clone());
            }
            walk_closeatoms(body, stack, out);
            for _ in bound {
                stack.pop();
            }
        }
        _ => {}
    }
}

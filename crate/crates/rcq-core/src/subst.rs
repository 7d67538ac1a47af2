//! Constant propagation and the two substitution operators.

use crate::syntax::{and, exists, fresh_var, not, or, Query, Term, Var};
use std::collections::BTreeSet;

/// Exhaustive constant propagation. The result is `⊥`, `⊤`, or free of `⊥`/`⊤`
/// subqueries. A count aggregation over `⊥` collapses to a zero-count
/// equality when it has no group variables left.
pub fn cp(q: &Query) -> Query {
    match q {
        Query::False | Query::True | Query::Pred(..) | Query::MulEq { .. } => q.clone(),
        Query::Eq(x, Term::Var(y)) if x == y => Query::True,
        Query::Eq(..) => q.clone(),
        Query::Not(inner) => match cp(inner) {
            Query::False => Query::True,
            Query::True => Query::False,
            other => not(other),
        },
        Query::And(a, b) => match (cp(a), cp(b)) {
            (Query::False, _) | (_, Query::False) => Query::False,
            (Query::True, rhs) => rhs,
            (lhs, Query::True) => lhs,
            (lhs, rhs) => and(lhs, rhs),
        },
        Query::Or(a, b) => match (cp(a), cp(b)) {
            (Query::True, _) | (_, Query::True) => Query::True,
            (Query::False, rhs) => rhs,
            (lhs, Query::False) => lhs,
            (lhs, rhs) => or(lhs, rhs),
        },
        Query::Exists(x, body) => match cp(body) {
            Query::False => Query::False,
            Query::True => Query::True,
            other => exists(x.clone(), other),
        },
        Query::CntAgg {
            result,
            bound,
            body,
        } => match cp(body) {
            Query::False => Query::Eq(result.clone(), Term::Const(crate::atom::Atom::Int(0))),
            Query::True if bound.is_empty() => {
                Query::Eq(result.clone(), Term::Const(crate::atom::Atom::Int(1)))
            }
            other => Query::CntAgg {
                result: result.clone(),
                bound: bound.clone(),
                body: Box::new(other),
            },
        },
    }
}

/// Constant propagation plus pruning of syntactically contradictory
/// conjunctions: a conjunction whose flattening contains both `Q` and `¬Q`
/// collapses to `⊥`. Used by the translation loops after each rewriting step.
pub fn cp_plus(q: &Query) -> Query {
    let q = prune(q);
    cp(&q)
}

fn prune(q: &Query) -> Query {
    match q {
        Query::Not(inner) => not(prune(inner)),
        Query::Or(a, b) => or(prune(a), prune(b)),
        Query::And(..) => {
            let conjuncts: Vec<Query> = q.flat_and().iter().map(prune).collect();
            let set: BTreeSet<&Query> = conjuncts.iter().collect();
            for c in &conjuncts {
                if let Query::Not(inner) = c {
                    if set.contains(inner.as_ref()) {
                        return Query::False;
                    }
                }
            }
            crate::syntax::and_all(conjuncts)
        }
        Query::Exists(x, body) => exists(x.clone(), prune(body)),
        Query::CntAgg {
            result,
            bound,
            body,
        } => Query::CntAgg {
            result: result.clone(),
            bound: bound.clone(),
            body: Box::new(prune(body)),
        },
        _ => q.clone(),
    }
}

/// Renames free occurrences of `x` to `y`, α-renaming binders to avoid
/// capture, and propagates constants (a collapsed `y = y` may expose them).
pub fn subst_var(q: &Query, x: &str, y: &str) -> Query {
    if x == y {
        return cp(q);
    }
    let mut avoid = q.av();
    avoid.insert(x.to_string());
    avoid.insert(y.to_string());
    cp(&subst_var_raw(q, x, y, &mut avoid))
}

fn subst_var_raw(q: &Query, x: &str, y: &str, avoid: &mut BTreeSet<Var>) -> Query {
    match q {
        Query::False | Query::True => q.clone(),
        Query::Eq(l, t) => {
            let l2 = if l == x { y.to_string() } else { l.clone() };
            let t2 = subst_term(t, x, y);
            Query::Eq(l2, t2)
        }
        Query::MulEq { result, lhs, rhs } => Query::MulEq {
            result: rename(result, x, y),
            lhs: rename(lhs, x, y),
            rhs: rename(rhs, x, y),
        },
        Query::Pred(name, args) => {
            Query::Pred(name.clone(), args.iter().map(|t| subst_term(t, x, y)).collect())
        }
        Query::Not(inner) => not(subst_var_raw(inner, x, y, avoid)),
        Query::And(a, b) => and(subst_var_raw(a, x, y, avoid), subst_var_raw(b, x, y, avoid)),
        Query::Or(a, b) => or(subst_var_raw(a, x, y, avoid), subst_var_raw(b, x, y, avoid)),
        Query::Exists(v, body) => {
            if v == x {
                q.clone()
            } else if v == y {
                let v2 = fresh_var(v, avoid);
                avoid.insert(v2.clone());
                let renamed = subst_var_raw(body, v, &v2, avoid);
                exists(v2, subst_var_raw(&renamed, x, y, avoid))
            } else {
                exists(v.clone(), subst_var_raw(body, x, y, avoid))
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let result2 = rename(result, x, y);
            if bound.iter().any(|v| v == x) {
                return Query::CntAgg {
                    result: result2,
                    bound: bound.clone(),
                    body: body.clone(),
                };
            }
            let mut bound2 = bound.clone();
            let mut body2 = (**body).clone();
            if let Some(i) = bound.iter().position(|v| v == y) {
                let v2 = fresh_var(y, avoid);
                avoid.insert(v2.clone());
                body2 = subst_var_raw(&body2, y, &v2, avoid);
                bound2[i] = v2;
            }
            Query::CntAgg {
                result: result2,
                bound: bound2,
                body: Box::new(subst_var_raw(&body2, x, y, avoid)),
            }
        }
    }
}

fn rename(v: &str, x: &str, y: &str) -> Var {
    if v == x {
        y.to_string()
    } else {
        v.to_string()
    }
}

fn subst_term(t: &Term, x: &str, y: &str) -> Term {
    match t {
        Term::Var(v) if v == x => Term::Var(y.to_string()),
        _ => t.clone(),
    }
}

/// Replaces every atomic predicate or equality containing free `x` by `⊥`
/// (except `x = x`, which becomes `⊤`), then propagates constants.
pub fn subst_bot(q: &Query, x: &str) -> Query {
    cp(&subst_bot_raw(q, x))
}

fn subst_bot_raw(q: &Query, x: &str) -> Query {
    match q {
        Query::False | Query::True => q.clone(),
        Query::Eq(l, t) => {
            if l == x && t.as_var() == Some(x) {
                Query::True
            } else if l == x || t.as_var() == Some(x) {
                Query::False
            } else {
                q.clone()
            }
        }
        Query::MulEq { result, lhs, rhs } => {
            if result == x || lhs == x || rhs == x {
                Query::False
            } else {
                q.clone()
            }
        }
        Query::Pred(_, args) => {
            if args.iter().any(|t| t.as_var() == Some(x)) {
                Query::False
            } else {
                q.clone()
            }
        }
        Query::Not(inner) => not(subst_bot_raw(inner, x)),
        Query::And(a, b) => and(subst_bot_raw(a, x), subst_bot_raw(b, x)),
        Query::Or(a, b) => or(subst_bot_raw(a, x), subst_bot_raw(b, x)),
        Query::Exists(v, body) => {
            if v == x {
                q.clone()
            } else {
                exists(v.clone(), subst_bot_raw(body, x))
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            if result == x {
                Query::False
            } else if bound.iter().any(|v| v == x) {
                q.clone()
            } else {
                Query::CntAgg {
                    result: result.clone(),
                    bound: bound.clone(),
                    body: Box::new(subst_bot_raw(body, x)),
                }
            }
        }
    }
}

/// Rewrites `q` so that free and bound variables are pairwise distinct and no
/// binder shadows another. Bound variables get fresh names where needed.
pub fn rename_apart(q: &Query) -> Query {
    let mut used = q.fv();
    rename_apart_go(q, &mut used)
}

fn rename_apart_go(q: &Query, used: &mut BTreeSet<Var>) -> Query {
    match q {
        Query::Not(inner) => not(rename_apart_go(inner, used)),
        Query::And(a, b) => {
            let a2 = rename_apart_go(a, used);
            let b2 = rename_apart_go(b, used);
            and(a2, b2)
        }
        Query::Or(a, b) => {
            let a2 = rename_apart_go(a, used);
            let b2 = rename_apart_go(b, used);
            or(a2, b2)
        }
        Query::Exists(v, body) => {
            if used.contains(v) {
                let v2 = fresh_var(v, used);
                used.insert(v2.clone());
                let body2 = subst_var(body, v, &v2);
                exists(v2, rename_apart_go(&body2, used))
            } else {
                used.insert(v.clone());
                exists(v.clone(), rename_apart_go(body, used))
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let mut bound2 = bound.clone();
            let mut body2 = (**body).clone();
            for slot in bound2.iter_mut() {
                if used.contains(slot.as_str()) {
                    let v2 = fresh_var(slot, used);
                    used.insert(v2.clone());
                    body2 = subst_var(&body2, slot, &v2);
                    *slot = v2;
                } else {
                    used.insert(slot.clone());
                }
            }
            Query::CntAgg {
                result: result.clone(),
                bound: bound2,
                body: Box::new(rename_apart_go(&body2, used)),
            }
        }
        _ => q.clone(),
    }
}

/// Whether free and bound variables are pairwise distinct (no variable both
/// free and bound, no two binders over the same name).
pub fn has_distinct_vars(q: &Query) -> bool {
    let fv = q.fv();
    let mut seen = BTreeSet::new();
    distinct_go(q, &fv, &mut seen)
}

fn distinct_go(q: &Query, fv: &BTreeSet<Var>, seen: &mut BTreeSet<Var>) -> bool {
    match q {
        Query::Not(inner) => distinct_go(inner, fv, seen),
        Query::And(a, b) | Query::Or(a, b) => {
            distinct_go(a, fv, seen) && distinct_go(b, fv, seen)
        }
        Query::Exists(v, body) => {
            if fv.contains(v) || !seen.insert(v.clone()) {
                return false;
            }
            distinct_go(body, fv, seen)
        }
        Query::CntAgg { bound, body, .. } => {
            for v in bound {
                if fv.contains(v) || !seen.insert(v.clone()) {
                    return false;
                }
            }
            distinct_go(body, fv, seen)
        }
        _ => true,
    }
}

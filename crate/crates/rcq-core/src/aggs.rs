//! Count-aggregation rewrites on RANF queries: an existentially quantified
//! conjunction with negated conjuncts can be answered by comparing two group
//! counts instead of materializing an intermediate join. Mini-scoping
//! shrinks aggregation and quantifier scopes; the driver `cnt` keeps a
//! rewrite only when it lowers the query cost on the training database.

use crate::eval::cost;
use crate::ranges::is_ranf;
use crate::structure::Structure;
use crate::syntax::{
    and, and_all, exists, exists_smart, fresh_var, not, or, or_all, Query, Term, Var,
};
use std::collections::BTreeSet;

/// Splits a flattened conjunction into positive conjuncts and the bodies of
/// negated conjuncts.
fn split_negations(parts: &[Query]) -> (Vec<Query>, Vec<Query>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for p in parts {
        match p {
            Query::Not(inner) => neg.push((**inner).clone()),
            _ => pos.push(p.clone()),
        }
    }
    (pos, neg)
}

fn binder_prefix(q: &Query) -> (Vec<Var>, &Query) {
    let mut vars = Vec::new();
    let mut body = q;
    while let Query::Exists(v, inner) = body {
        vars.push(v.clone());
        body = inner;
    }
    (vars, body)
}

fn fresh_pair(avoid: &BTreeSet<Var>) -> (Var, Var) {
    let c = fresh_var("c", avoid);
    let mut avoid2 = avoid.clone();
    avoid2.insert(c.clone());
    let c2 = fresh_var("c", &avoid2);
    (c, c2)
}

fn cnt_node(result: &str, bound: &[Var], body: Query) -> Query {
    Query::CntAgg {
        result: result.to_string(),
        bound: bound.to_vec(),
        body: Box::new(body),
    }
}

/// Rewrites `∃v. Q_v ∧ ⋀ ¬Q̄` into a count comparison. Returns `None` when
/// the query does not match or the rewrite would leave RANF.
pub fn apply_hash(q: &Query) -> Option<Query> {
    let (binders, body) = binder_prefix(q);
    if binders.is_empty() {
        return None;
    }
    let (pos, neg) = split_negations(&body.flat_and());
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let q_v = and_all(pos);
    if !binders.iter().all(|v| q_v.fv().contains(v)) {
        return None;
    }
    let avoid = q.av();
    let (c, c2) = fresh_pair(&avoid);

    let project = |inner: Query| -> Query {
        let mut out = inner;
        for v in binders.iter().rev() {
            out = exists_smart(v, out);
        }
        out
    };
    let first = and_all(
        std::iter::once(project(q_v.clone()))
            .chain(
                neg.iter()
                    .map(|nq| not(project(and(q_v.clone(), nq.clone())))),
            )
            .collect(),
    );
    let overlap = and(q_v.clone(), or_all(neg.clone()));
    let second = exists(
        c.clone(),
        exists(
            c2.clone(),
            and_all(vec![
                cnt_node(&c, &binders, q_v.clone()),
                cnt_node(&c2, &binders, overlap),
                not(Query::Eq(c.clone(), Term::Var(c2.clone()))),
            ]),
        ),
    );
    let out = or(first, second);
    is_ranf(&out).then_some(out)
}

/// Rewrites `Q̂ ∧ ¬∃v. Q_v ∧ ⋀ ¬Q̄` into an equal-counts filter.
pub fn apply_hashhash(q: &Query) -> Option<Query> {
    let Query::And(a, b) = q else { return None };
    let Query::Not(negated) = b.as_ref() else {
        return None;
    };
    let (binders, body) = binder_prefix(negated);
    if binders.is_empty() {
        return None;
    }
    let (pos, neg) = split_negations(&body.flat_and());
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let q_hat = (**a).clone();
    let q_v = and_all(pos);
    if !binders.iter().all(|v| q_v.fv().contains(v)) {
        return None;
    }
    let avoid = q.av();
    let (c, c2) = fresh_pair(&avoid);

    let project = |inner: Query| -> Query {
        let mut out = inner;
        for v in binders.iter().rev() {
            out = exists_smart(v, out);
        }
        out
    };
    let first = and(q_hat.clone(), not(project(q_v.clone())));
    let overlap = and(q_v.clone(), or_all(neg.clone()));
    let second = exists(
        c.clone(),
        exists(
            c2.clone(),
            and_all(vec![
                q_hat,
                cnt_node(&c, &binders, q_v.clone()),
                cnt_node(&c2, &binders, overlap),
                Query::Eq(c.clone(), Term::Var(c2.clone())),
            ]),
        ),
    );
    let out = or(first, second);
    is_ranf(&out).then_some(out)
}

/// Pulls conjuncts without bound-variable occurrences out of aggregation and
/// quantifier bodies, and splits an aggregation over conjuncts with disjoint
/// bound variables into a product of aggregations.
pub fn mini_scope(q: &Query) -> Query {
    let out = mini_scope_go(q);
    debug_assert!(!is_ranf(q) || is_ranf(&out));
    out
}

fn mini_scope_go(q: &Query) -> Query {
    match q {
        Query::Not(inner) => not(mini_scope_go(inner)),
        Query::Or(a, b) => or(mini_scope_go(a), mini_scope_go(b)),
        Query::And(..) => {
            let parts: Vec<Query> = q.flat_and().iter().map(mini_scope_go).collect();
            and_all(dedup(parts))
        }
        Query::Exists(x, body) => {
            let body2 = mini_scope_go(body);
            if let Query::Or(..) = body2 {
                // quantification distributes over disjunction, letting each
                // disjunct shrink its own scope
                let distributed = crate::syntax::or_all(
                    body2
                        .flat_or()
                        .into_iter()
                        .map(|d| mini_scope_go(&exists_smart(x, d)))
                        .collect(),
                );
                if is_ranf(&distributed) {
                    return distributed;
                }
            }
            let parts = body2.flat_and();
            // a binder holding a count result stays put: the count-comparison
            // idiom keeps its fresh variables quantified outermost
            let holds_count = parts
                .iter()
                .any(|p| matches!(p, Query::CntAgg { result, .. } if result == x));
            if holds_count {
                return exists_smart(x, and_all(dedup(parts)));
            }
            let (pulled, rest): (Vec<Query>, Vec<Query>) = parts
                .into_iter()
                .partition(|p| !p.fv().contains(x));
            if pulled.is_empty() || rest.is_empty() {
                return exists_smart(x, body2);
            }
            let candidate = and_all(dedup(
                order_positives_first(pulled)
                    .into_iter()
                    .chain(std::iter::once(exists_smart(x, and_all(rest.clone()))))
                    .collect(),
            ));
            if is_ranf(&candidate) {
                candidate
            } else {
                exists_smart(x, body2)
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let body2 = mini_scope_go(body);
            let parts = body2.flat_and();
            let (pulled, rest): (Vec<Query>, Vec<Query>) = parts
                .into_iter()
                .partition(|p| p.fv().is_disjoint(&bound.iter().cloned().collect()));
            if rest.is_empty() {
                return cnt_node(result, bound, body2);
            }
            let inner_bound: Vec<Var> = bound
                .iter()
                .filter(|v| rest.iter().any(|p| p.fv().contains(*v)))
                .cloned()
                .collect();
            if inner_bound.len() != bound.len() {
                // a bound variable occurs nowhere the aggregation can count
                return cnt_node(result, bound, body2);
            }
            let agg = split_product(result, bound, &rest)
                .unwrap_or_else(|| cnt_node(result, bound, and_all(rest.clone())));
            if pulled.is_empty() {
                return agg;
            }
            let candidate = and_all(dedup(
                order_positives_first(pulled)
                    .into_iter()
                    .chain(std::iter::once(agg))
                    .collect(),
            ));
            if is_ranf(&candidate) {
                candidate
            } else {
                cnt_node(result, bound, body2)
            }
        }
        _ => q.clone(),
    }
}

/// Product split: conjuncts grouped into connected components by shared
/// bound variables; two components become two aggregations and a product
/// constraint.
fn split_product(result: &str, bound: &[Var], parts: &[Query]) -> Option<Query> {
    let bound_set: BTreeSet<Var> = bound.iter().cloned().collect();
    let mut components: Vec<(BTreeSet<Var>, Vec<Query>)> = Vec::new();
    for p in parts {
        let pvars: BTreeSet<Var> = p
            .fv()
            .intersection(&bound_set)
            .cloned()
            .collect();
        let mut merged = (pvars, vec![p.clone()]);
        let mut remaining = Vec::new();
        for comp in components.into_iter() {
            if comp.0.is_disjoint(&merged.0) {
                remaining.push(comp);
            } else {
                merged.0.extend(comp.0);
                merged.1.extend(comp.1);
            }
        }
        remaining.push(merged);
        components = remaining;
    }
    if components.len() < 2 {
        return None;
    }
    let (vars_a, parts_a) = components.remove(0);
    let mut vars_b = BTreeSet::new();
    let mut parts_b = Vec::new();
    for (v, p) in components {
        vars_b.extend(v);
        parts_b.extend(p);
    }
    if vars_a.is_empty() || vars_b.is_empty() {
        return None;
    }
    let body_a = and_all(parts_a);
    let body_b = and_all(parts_b);
    let mut avoid: BTreeSet<Var> = body_a.av();
    avoid.extend(body_b.av());
    avoid.insert(result.to_string());
    let (c1, c2) = fresh_pair(&avoid);
    let bound_a: Vec<Var> = bound.iter().filter(|v| vars_a.contains(*v)).cloned().collect();
    let bound_b: Vec<Var> = bound.iter().filter(|v| vars_b.contains(*v)).cloned().collect();
    let out = exists(
        c1.clone(),
        exists(
            c2.clone(),
            and_all(vec![
                cnt_node(&c1, &bound_a, body_a),
                cnt_node(&c2, &bound_b, body_b),
                Query::MulEq {
                    result: result.to_string(),
                    lhs: c1.clone(),
                    rhs: c2.clone(),
                },
            ]),
        ),
    );
    is_ranf(&out).then_some(out)
}

fn dedup(parts: Vec<Query>) -> Vec<Query> {
    let mut out = Vec::new();
    for p in parts.into_iter().flat_map(|p| p.flat_and()) {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Absorption: inside a conjunction, a negated conjunct may drop the parts
/// that already occur positively alongside it — rows reaching the anti-join
/// satisfy them anyway.
pub fn prune_implied(q: &Query) -> Query {
    match q {
        Query::And(..) => {
            let parts: Vec<Query> = q.flat_and().iter().map(prune_implied).collect();
            let positives: BTreeSet<Query> = parts
                .iter()
                .filter(|p| !p.is_neg())
                .cloned()
                .collect();
            let pruned: Vec<Query> = parts
                .into_iter()
                .map(|p| match p {
                    Query::Not(inner) => {
                        let keep: Vec<Query> = inner
                            .flat_and()
                            .into_iter()
                            .filter(|m| !positives.contains(m))
                            .collect();
                        not(and_all(keep))
                    }
                    other => other,
                })
                .collect();
            and_all(dedup(pruned))
        }
        Query::Not(inner) => not(prune_implied(inner)),
        Query::Or(a, b) => or(prune_implied(a), prune_implied(b)),
        Query::Exists(x, body) => exists_smart(x, prune_implied(body)),
        Query::CntAgg {
            result,
            bound,
            body,
        } => cnt_node(result, bound, prune_implied(body)),
        _ => q.clone(),
    }
}

/// Scope-shrinking and simplification to a fixpoint: mini-scoping, binder
/// sinking, absorption, and constant propagation. Keeps RANF intact.
fn polish(q: &Query) -> Query {
    let mut current = q.clone();
    for _ in 0..8 {
        let next = crate::subst::cp(&prune_implied(&scope_deep(&mini_scope_go(
            &current,
        ))));
        if next == current {
            break;
        }
        if is_ranf(&current) && !is_ranf(&next) {
            break;
        }
        current = next;
    }
    current
}

/// Sinks every binder of a quantifier run to its minimal scope, splitting
/// over connected components of the conjuncts and keeping count-result
/// binders outermost.
fn scope_deep(q: &Query) -> Query {
    match q {
        Query::Exists(..) => {
            let mut vars: Vec<Var> = Vec::new();
            let mut body = q;
            while let Query::Exists(v, inner) = body {
                vars.push(v.clone());
                body = inner;
            }
            let body2 = scope_deep(body);
            if let Query::Or(..) = body2 {
                let distributed = or_all(
                    body2
                        .flat_or()
                        .into_iter()
                        .map(|d| {
                            let mut out = d;
                            for v in vars.iter().rev() {
                                out = exists_smart(v, out);
                            }
                            scope_deep(&out)
                        })
                        .collect(),
                );
                if is_ranf(&distributed) {
                    return distributed;
                }
            }
            let parts: Vec<Query> = body2.flat_and();
            let rebuilt = scope_chain(&vars, parts.clone());
            if is_ranf(&rebuilt) {
                rebuilt
            } else {
                let mut out = and_all(parts);
                for v in vars.iter().rev() {
                    out = exists_smart(v, out);
                }
                out
            }
        }
        Query::Not(inner) => not(scope_deep(inner)),
        Query::Or(a, b) => or(scope_deep(a), scope_deep(b)),
        Query::And(..) => {
            and_all(dedup(q.flat_and().iter().map(scope_deep).collect()))
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => cnt_node(result, bound, scope_deep(body)),
        _ => q.clone(),
    }
}

fn scope_chain(vars: &[Var], parts: Vec<Query>) -> Query {
    let used: Vec<Var> = vars
        .iter()
        .filter(|v| parts.iter().any(|p| p.fv().contains(*v)))
        .cloned()
        .collect();
    if used.is_empty() {
        return order_conj(parts);
    }
    let (inside, outside): (Vec<Query>, Vec<Query>) = parts
        .into_iter()
        .partition(|p| used.iter().any(|v| p.fv().contains(v)));
    if !outside.is_empty() {
        let block = scope_chain(&used, inside);
        let mut all = outside;
        all.push(block);
        return order_conj(all);
    }
    // split into components connected through the chain variables
    let mut components: Vec<(BTreeSet<Var>, Vec<Query>)> = Vec::new();
    for p in inside {
        let pvars: BTreeSet<Var> = p
            .fv()
            .into_iter()
            .filter(|v| used.contains(v))
            .collect();
        let mut merged = (pvars, vec![p]);
        let mut rest = Vec::new();
        for comp in components {
            if comp.0.is_disjoint(&merged.0) {
                rest.push(comp);
            } else {
                merged.0.extend(comp.0);
                merged.1.extend(comp.1);
            }
        }
        rest.push(merged);
        components = rest;
    }
    if components.len() > 1 {
        let blocks: Vec<Query> = components
            .into_iter()
            .map(|(cv, cp)| {
                let comp_vars: Vec<Var> =
                    used.iter().filter(|v| cv.contains(*v)).cloned().collect();
                scope_chain(&comp_vars, cp)
            })
            .collect();
        return order_conj(blocks);
    }
    let (_, parts) = components.pop().unwrap();
    // outermost binder: count results first, then rarest occurrence
    let pick = used
        .iter()
        .min_by_key(|v| {
            let is_count = parts
                .iter()
                .any(|p| matches!(p, Query::CntAgg { result, .. } if result == *v));
            let occurrences = parts.iter().filter(|p| p.fv().contains(*v)).count();
            (!is_count, occurrences, (*v).clone())
        })
        .cloned()
        .unwrap();
    let remaining: Vec<Var> = used.into_iter().filter(|v| *v != pick).collect();
    exists(pick, scope_chain(&remaining, parts))
}

/// Left-associative conjunction with equality conjuncts placed only once a
/// variable of theirs is in scope and negations after the positives.
fn order_conj(parts: Vec<Query>) -> Query {
    let parts = dedup(parts);
    let mut positives = Vec::new();
    let mut eqs = Vec::new();
    let mut negs = Vec::new();
    for p in parts {
        match &p {
            Query::Eq(x, crate::syntax::Term::Var(y)) if x != y => eqs.push(p),
            Query::MulEq { .. } => eqs.push(p),
            Query::Not(_) => negs.push(p),
            _ => positives.push(p),
        }
    }
    let mut scope: BTreeSet<Var> = positives.iter().flat_map(|p| p.fv()).collect();
    let mut ordered = positives;
    let mut pending = eqs;
    while !pending.is_empty() {
        let pick = pending.iter().position(|e| match e {
            Query::Eq(x, crate::syntax::Term::Var(y)) => {
                scope.contains(x) || scope.contains(y)
            }
            Query::MulEq { lhs, rhs, .. } => scope.contains(lhs) && scope.contains(rhs),
            _ => false,
        });
        match pick {
            Some(i) => {
                let e = pending.remove(i);
                scope.extend(e.fv());
                ordered.push(e);
            }
            None => {
                ordered.append(&mut pending);
            }
        }
    }
    ordered.extend(negs);
    and_all(ordered)
}

fn order_positives_first(parts: Vec<Query>) -> Vec<Query> {
    let (neg, pos): (Vec<Query>, Vec<Query>) =
        parts.into_iter().partition(|p| p.is_neg());
    pos.into_iter().chain(neg).collect()
}

/// Cost-guided driver: tries the count rewrites at each site top-down and
/// keeps the cheapest alternative on the training database. The result is
/// RANF, equivalent, and never costlier than the input on that database.
pub fn cnt(q: &Query, training: &Structure) -> Query {
    let out = cnt_go(q, training);
    let better = match (cost(&out, training), cost(q, training)) {
        (Ok(new), Ok(old)) => new <= old,
        _ => false,
    };
    if better {
        out
    } else {
        q.clone()
    }
}

fn cnt_go(q: &Query, training: &Structure) -> Query {
    let mut candidates: Vec<Query> = Vec::new();
    for rewrite in [apply_hash(q), apply_hashhash(q)].into_iter().flatten() {
        candidates.push(polish(&rewrite));
        candidates.push(mini_scope(&rewrite));
        candidates.push(rewrite);
    }
    let base = match q {
        Query::Not(inner) => not(cnt_go(inner, training)),
        Query::Or(a, b) => or(cnt_go(a, training), cnt_go(b, training)),
        Query::And(a, b) => and(cnt_go(a, training), cnt_go(b, training)),
        Query::Exists(x, body) => exists_smart(x, cnt_go(body, training)),
        Query::CntAgg {
            result,
            bound,
            body,
        } => cnt_node(result, bound, cnt_go(body, training)),
        _ => q.clone(),
    };
    candidates.push(polish(&base));
    candidates.push(mini_scope(&base));
    candidates
        .into_iter()
        .filter(is_ranf)
        .min_by_key(|c| (cost(c, training).unwrap_or(u64::MAX), c.clone()))
        .unwrap_or_else(|| q.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Atom;
    use crate::parser::parse_query_infer;
    use crate::printer::print_query;

    fn parse(text: &str) -> Query {
        parse_query_infer(text).unwrap().0
    }

    #[test]
    fn hash_requires_negated_conjunct() {
        assert!(apply_hash(&parse("EXISTS y. P1(x) AND P2(y)")).is_none());
        assert!(apply_hash(&parse("P1(x)")).is_none());
    }

    #[test]
    fn hash_rewrite_shape() {
        let q = parse("EXISTS y. P1(x) AND P2(y) AND NOT P3(x, y)");
        let out = apply_hash(&q).unwrap();
        assert!(is_ranf(&out));
        assert_eq!(out.fv(), q.fv());
        let text = print_query(&out);
        assert!(text.contains("CNT c: y."), "{text}");
        assert!(text.contains("NOT c = c1"), "{text}");
    }

    #[test]
    fn hashhash_matches_guarded_negation() {
        let q = parse("P1(x) AND NOT EXISTS y. P1(x) AND P2(y) AND NOT P3(x, y)");
        let out = apply_hashhash(&q).unwrap();
        assert!(is_ranf(&out));
        assert_eq!(out.fv(), q.fv());
        assert!(apply_hashhash(&parse("P1(x) AND NOT EXISTS y. P2(y)")).is_none());
    }

    #[test]
    fn guarded_negation_count_rewrite_golden() {
        let q = parse("P1(x) AND NOT EXISTS y. P1(x) AND P2(y) AND NOT P3(x, y)");
        let out = mini_scope(&apply_hashhash(&q).unwrap());
        let expect = "((P1(x) AND (NOT (P1(x) AND (EXISTS y. P2(y))))) OR \
                      (EXISTS c, c1. (((P1(x) AND (CNT c: y. P2(y))) AND \
                      (CNT c1: y. (P2(y) AND P3(x, y)))) AND c = c1)))";
        assert_eq!(print_query(&out), expect);
    }

    #[test]
    fn mini_scope_pulls_free_conjuncts() {
        let q = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(parse("P1(x) AND P2(y)")),
        };
        let out = mini_scope(&q);
        assert_eq!(print_query(&out), "(P1(x) AND (CNT c: y. P2(y)))");
        let untouched = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(parse("P2(y)")),
        };
        assert_eq!(mini_scope(&untouched), untouched);
    }

    #[test]
    fn product_split_on_disjoint_bound_variables() {
        let q = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into(), "z".into()],
            body: Box::new(parse("P2(x, y) AND Q2(x, z)")),
        };
        let out = mini_scope(&q);
        let text = print_query(&out);
        assert!(text.contains("c = c1 * c2"), "{text}");
        assert!(is_ranf(&out));

        // counts multiply: brute-force the groups
        let s = Structure::new()
            .with_relation(
                "P2",
                [
                    vec![Atom::int(1), Atom::int(10)],
                    vec![Atom::int(1), Atom::int(11)],
                ],
            )
            .with_relation(
                "Q2",
                [
                    vec![Atom::int(1), Atom::int(20)],
                    vec![Atom::int(1), Atom::int(21)],
                    vec![Atom::int(1), Atom::int(22)],
                ],
            );
        let direct = crate::eval::eval_ranf(&q, &s).unwrap();
        let split = crate::eval::eval_ranf(&out, &s).unwrap();
        assert_eq!(direct.rows, split.rows);
        assert!(direct
            .rows
            .iter()
            .any(|r| r.contains(&Atom::int(6))));
    }

    #[test]
    fn cnt_is_identity_on_simple_atoms() {
        let q = parse("B(x)");
        assert_eq!(cnt(&q, &Structure::new()), q);
    }
}

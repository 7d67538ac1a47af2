//! Normal forms: conversion to safe-range normal form (negations pushed to
//! atoms, equalities and quantifiers) and lowering of safe-range SRNF
//! queries to relational algebra normal form.

use crate::eval::cost;
use crate::ranges::{is_ranf, is_safe_range};
use crate::structure::Structure;
use crate::subst::{cp, subst_var};
use crate::syntax::{
    and, and_all, exists_smart, fresh_var, not, or_all, Query, Term, Var,
};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

#[derive(Clone, Debug)]
pub enum NormalizeError {
    NotSafeRange(String),
    Unsupported(&'static str),
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::NotSafeRange(q) => {
                write!(f, "query (with restrictors) is not safe range: {q}")
            }
            NormalizeError::Unsupported(what) => write!(f, "cannot lower {what}"),
        }
    }
}

impl std::error::Error for NormalizeError {}

/// Safe-range normal form: pushes negations, eliminates double negation,
/// drops vacuous binders, and distributes quantifiers over disjunction.
/// Preserves equivalence, free variables, and safe-rangeness.
pub fn srnf(q: &Query) -> Query {
    push(&cp(q))
}

fn push(q: &Query) -> Query {
    match q {
        Query::Not(inner) => match inner.as_ref() {
            Query::False => Query::True,
            Query::True => Query::False,
            Query::Not(p) => push(p),
            Query::Or(a, b) => push(&and(not((**a).clone()), not((**b).clone()))),
            Query::And(a, b) => {
                push(&crate::syntax::or(not((**a).clone()), not((**b).clone())))
            }
            Query::Exists(x, body) => {
                if !body.fv().contains(x) {
                    return push(&not((**body).clone()));
                }
                let pb = push(body);
                if let Query::Or(a, b) = &pb {
                    let left = not(crate::syntax::exists(x.clone(), (**a).clone()));
                    let right = not(crate::syntax::exists(x.clone(), (**b).clone()));
                    push(&and(left, right))
                } else {
                    not(exists_smart(x, pb))
                }
            }
            _ => not(push(inner)),
        },
        Query::Or(a, b) => crate::syntax::or(push(a), push(b)),
        Query::And(a, b) => and(push(a), push(b)),
        Query::Exists(x, body) => {
            if !body.fv().contains(x) {
                return push(body);
            }
            let pb = push(body);
            if let Query::Or(a, b) = &pb {
                let left = crate::syntax::exists(x.clone(), (**a).clone());
                let right = crate::syntax::exists(x.clone(), (**b).clone());
                push(&crate::syntax::or(left, right))
            } else {
                exists_smart(x, pb)
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => Query::CntAgg {
            result: result.clone(),
            bound: bound.clone(),
            body: Box::new(push(body)),
        },
        _ => q.clone(),
    }
}

/// SRNF shape: under every negation sits an atomic predicate, an equality,
/// or an existentially quantified query.
pub fn is_srnf(q: &Query) -> bool {
    match q {
        Query::Not(inner) => {
            let shape_ok = inner.is_atomic_predicate()
                || matches!(inner.as_ref(), Query::Eq(..) | Query::MulEq { .. })
                || matches!(inner.as_ref(), Query::Exists(..));
            shape_ok && is_srnf(inner)
        }
        Query::Or(a, b) | Query::And(a, b) => is_srnf(a) && is_srnf(b),
        Query::Exists(_, body) => is_srnf(body),
        Query::CntAgg { body, .. } => is_srnf(body),
        _ => true,
    }
}

/// No free variable of an outer scope is captured by an inner binder, and a
/// variable never occurs both free and bound in any subquery.
pub fn is_binder_hygienic(q: &Query) -> bool {
    fn go(q: &Query, outer: &mut BTreeSet<Var>) -> bool {
        match q {
            Query::Not(inner) => go(inner, outer),
            Query::Or(a, b) | Query::And(a, b) => go(a, outer) && go(b, outer),
            Query::Exists(v, body) => {
                if outer.contains(v) {
                    return false;
                }
                outer.insert(v.clone());
                let ok = go(body, outer);
                outer.remove(v);
                ok
            }
            Query::CntAgg { bound, body, .. } => {
                for v in bound {
                    if outer.contains(v) {
                        return false;
                    }
                }
                for v in bound {
                    outer.insert(v.clone());
                }
                let ok = go(body, outer);
                for v in bound {
                    outer.remove(v);
                }
                ok
            }
            _ => true,
        }
    }
    go(q, &mut q.fv())
}

pub struct NormCtx<'a> {
    training: &'a Structure,
    memo: HashMap<(Query, Vec<Query>), (Query, Vec<Query>)>,
}

impl<'a> NormCtx<'a> {
    pub fn new(training: &'a Structure) -> Self {
        NormCtx {
            training,
            memo: HashMap::new(),
        }
    }

    fn query_cost(&self, q: &Query) -> u64 {
        cost(q, self.training).unwrap_or(u64::MAX)
    }
}

/// Lowers a safe-range SRNF query (with the conjoined restrictor set) to
/// RANF. Returns the RANF query and the subset of restrictors it implies.
pub fn sr2ranf(
    q: &Query,
    gamma: &[Query],
    ctx: &mut NormCtx,
) -> Result<(Query, Vec<Query>), NormalizeError> {
    let key = (q.clone(), gamma.to_vec());
    if let Some(hit) = ctx.memo.get(&key) {
        return Ok(hit.clone());
    }
    let out = sr2ranf_raw(q, gamma, ctx)?;
    ctx.memo.insert(key, out.clone());
    Ok(out)
}

fn sr2ranf_raw(
    q: &Query,
    gamma: &[Query],
    ctx: &mut NormCtx,
) -> Result<(Query, Vec<Query>), NormalizeError> {
    if is_ranf(q) {
        return Ok((cp(q), vec![]));
    }
    match q {
        Query::Eq(_, Term::Var(_)) | Query::MulEq { .. } => {
            sr2ranf_conj(std::slice::from_ref(q), gamma, ctx)
        }
        Query::Not(inner) => {
            let choices = minimal_subsets(gamma, |subset| {
                is_safe_range(&and_all(
                    std::iter::once(not((**inner).clone()))
                        .chain(subset.iter().cloned())
                        .collect(),
                ))
            });
            if choices.is_empty() {
                return Err(NormalizeError::NotSafeRange(crate::printer::print_query(q)));
            }
            if choices.iter().any(|c| c.is_empty()) {
                // the negation is closed; lower its body standalone
                let (inner_hat, _) = sr2ranf(inner, &[], ctx)?;
                return Ok((cp(&not(inner_hat)), vec![]));
            }
            let mut best: Option<(u64, Query, Vec<Query>)> = None;
            for subset in choices {
                let (hat, absorbed) =
                    sr2ranf_conj(std::slice::from_ref(q), &subset, ctx)?;
                let c = ctx.query_cost(&hat);
                if best.as_ref().map(|(bc, ..)| c < *bc).unwrap_or(true) {
                    best = Some((c, hat, absorbed));
                }
            }
            let (_, hat, absorbed) = best.unwrap();
            Ok((hat, absorbed))
        }
        Query::Or(..) => {
            let disjuncts = q.flat_or();
            let choices = minimal_subsets(gamma, |subset| {
                let parts: Vec<Query> = disjuncts
                    .iter()
                    .map(|d| {
                        and_all(
                            std::iter::once(d.clone())
                                .chain(subset.iter().cloned())
                                .collect(),
                        )
                    })
                    .collect();
                let fvs: BTreeSet<BTreeSet<Var>> = parts.iter().map(|p| p.fv()).collect();
                fvs.len() <= 1 && is_safe_range(&or_all(parts))
            });
            if choices.is_empty() {
                return Err(NormalizeError::NotSafeRange(crate::printer::print_query(q)));
            }
            let mut best: Option<(u64, Query, Vec<Query>)> = None;
            for subset in choices {
                let mut hats = Vec::new();
                for d in &disjuncts {
                    let (hat, _) = sr2ranf_conj(&d.flat_and(), &subset, ctx)?;
                    hats.push(hat);
                }
                let candidate = cp(&or_all(hats));
                if !is_ranf(&candidate) {
                    continue;
                }
                let c = ctx.query_cost(&candidate);
                if best.as_ref().map(|(bc, ..)| c < *bc).unwrap_or(true) {
                    best = Some((c, candidate, subset.clone()));
                }
            }
            let (_, candidate, subset) =
                best.ok_or_else(|| NormalizeError::NotSafeRange(crate::printer::print_query(q)))?;
            Ok((candidate, subset))
        }
        Query::And(..) => sr2ranf_conj(&q.flat_and(), gamma, ctx),
        Query::Exists(..) => {
            // maximal binder prefix
            let mut binders: Vec<Var> = Vec::new();
            let mut body = q;
            while let Query::Exists(v, inner) = body {
                binders.push(v.clone());
                body = inner;
            }
            let gamma_fv: BTreeSet<Var> =
                gamma.iter().flat_map(|g| g.fv()).collect();
            let mut body2 = body.clone();
            let mut binders2 = binders.clone();
            if binders.iter().any(|v| gamma_fv.contains(v)) {
                let mut avoid: BTreeSet<Var> = body.fv();
                avoid.extend(gamma_fv.iter().cloned());
                avoid.extend(q.av());
                for slot in binders2.iter_mut() {
                    if gamma_fv.contains(slot.as_str()) {
                        let v2 = fresh_var(slot, &avoid);
                        avoid.insert(v2.clone());
                        body2 = subst_var(&body2, slot, &v2);
                        *slot = v2;
                    }
                }
            }
            let choices = minimal_subsets(gamma, |subset| {
                is_safe_range(&and_all(
                    std::iter::once(body2.clone())
                        .chain(subset.iter().cloned())
                        .collect(),
                ))
            });
            if choices.is_empty() {
                return Err(NormalizeError::NotSafeRange(crate::printer::print_query(q)));
            }
            let mut best: Option<(u64, Query, Vec<Query>)> = None;
            for subset in choices {
                let (hat, _) = sr2ranf_conj(&body2.flat_and(), &subset, ctx)?;
                let mut rebuilt = hat;
                for v in binders2.iter().rev() {
                    rebuilt = exists_smart(v, rebuilt);
                }
                let candidate = cp(&rebuilt);
                if !is_ranf(&candidate) {
                    continue;
                }
                let c = ctx.query_cost(&candidate);
                if best.as_ref().map(|(bc, ..)| c < *bc).unwrap_or(true) {
                    best = Some((c, candidate, subset.clone()));
                }
            }
            let (_, candidate, subset) =
                best.ok_or_else(|| NormalizeError::NotSafeRange(crate::printer::print_query(q)))?;
            Ok((candidate, subset))
        }
        _ => Ok((cp(q), vec![])),
    }
}

/// The conjunction case: RANF-lower each positive conjunct against the
/// others as restrictors, pick a minimal cover of the positives, and
/// assemble a RANF conjunction ordering equalities so each has a variable
/// already in scope.
fn sr2ranf_conj(
    parts: &[Query],
    gamma: &[Query],
    ctx: &mut NormCtx,
) -> Result<(Query, Vec<Query>), NormalizeError> {
    // pool keeps first occurrence order: conjuncts then restrictors
    let mut pool: Vec<Query> = Vec::new();
    let mut from_gamma: Vec<bool> = Vec::new();
    for p in parts.iter().flat_map(|p| p.flat_and()) {
        if !pool.contains(&p) {
            pool.push(p);
            from_gamma.push(false);
        }
    }
    for g in gamma {
        if !pool.contains(g) {
            pool.push(g.clone());
            from_gamma.push(true);
        }
    }

    let mut positives: Vec<Query> = Vec::new();
    let mut equalities: Vec<Query> = Vec::new();
    let mut neg_equalities: Vec<Query> = Vec::new();
    let mut negations: Vec<Query> = Vec::new();
    for member in &pool {
        match member {
            Query::Eq(x, Term::Var(y)) if x != y => equalities.push(member.clone()),
            Query::MulEq { .. } => equalities.push(member.clone()),
            Query::Not(inner) => match inner.as_ref() {
                Query::Eq(x, Term::Var(y)) if x != y => {
                    neg_equalities.push(member.clone())
                }
                _ => negations.push(member.clone()),
            },
            _ => positives.push(member.clone()),
        }
    }

    // lower each positive with the remaining positives and equalities as
    // candidate restrictors
    let restrictor_pool: Vec<Query> = positives
        .iter()
        .chain(equalities.iter())
        .cloned()
        .collect();
    let mut hats: Vec<Query> = Vec::new();
    let mut restrs: Vec<Vec<Query>> = Vec::new();
    for p in &positives {
        let others: Vec<Query> = restrictor_pool
            .iter()
            .filter(|m| *m != p)
            .cloned()
            .collect();
        let (hat, restr) = sr2ranf(p, &others, ctx)?;
        hats.push(hat);
        restrs.push(restr);
    }
    let mut neg_hats: Vec<Query> = Vec::new();
    for n in &negations {
        let inner = match n {
            Query::Not(inner) => inner.as_ref().clone(),
            _ => unreachable!(),
        };
        let (hat, _) = sr2ranf(&inner, &restrictor_pool, ctx)?;
        neg_hats.push(hat);
    }

    // minimal covers of the positives by chosen-plus-absorbed sets
    let covers = minimal_subsets(&positives, |chosen| {
        let mut covered: BTreeSet<&Query> = chosen.iter().collect();
        for (i, p) in positives.iter().enumerate() {
            if chosen.contains(p) {
                covered.extend(restrs[i].iter());
            }
        }
        positives.iter().all(|p| covered.contains(p))
    });
    if covers.is_empty() && !positives.is_empty() {
        return Err(NormalizeError::NotSafeRange(
            crate::printer::print_query(&and_all(pool.clone())),
        ));
    }
    let covers = if positives.is_empty() {
        vec![vec![]]
    } else {
        covers
    };

    let mut best: Option<(u64, Query, Vec<Query>)> = None;
    for cover in &covers {
        let chosen_hats: Vec<Query> = positives
            .iter()
            .enumerate()
            .filter(|(_, p)| cover.contains(p))
            .map(|(i, _)| hats[i].clone())
            .collect();
        let Some(candidate) = assemble_conjunction(
            &chosen_hats,
            &equalities,
            &neg_equalities,
            &neg_hats,
        ) else {
            continue;
        };
        let candidate = cp(&candidate);
        if !is_ranf(&candidate) {
            continue;
        }
        let c = ctx.query_cost(&candidate);
        if best.as_ref().map(|(bc, ..)| c < *bc).unwrap_or(true) {
            // restrictors this result implies: chosen members, what they
            // absorbed, and every equality conjoined outright
            let mut absorbed: BTreeSet<Query> = BTreeSet::new();
            for (i, p) in positives.iter().enumerate() {
                if cover.contains(p) {
                    absorbed.insert(p.clone());
                    absorbed.extend(restrs[i].iter().cloned());
                }
            }
            absorbed.extend(equalities.iter().cloned());
            let reported: Vec<Query> = pool
                .iter()
                .zip(from_gamma.iter())
                .filter(|(m, fg)| **fg && absorbed.contains(*m))
                .map(|(m, _)| m.clone())
                .collect();
            best = Some((c, candidate, reported));
        }
    }
    match best {
        Some((_, candidate, reported)) => Ok((candidate, reported)),
        None => Err(NormalizeError::NotSafeRange(
            crate::printer::print_query(&and_all(pool)),
        )),
    }
}

/// Builds `positives ∧ equalities ∧ negated-equalities ∧ negations`
/// left-associatively, picking each equality only once one of its variables
/// is already in scope. Returns `None` when no RANF ordering exists.
fn assemble_conjunction(
    positives: &[Query],
    equalities: &[Query],
    neg_equalities: &[Query],
    negations: &[Query],
) -> Option<Query> {
    let mut conjuncts: Vec<Query> = positives.to_vec();
    let mut scope: BTreeSet<Var> = positives.iter().flat_map(|p| p.fv()).collect();
    let mut pending: Vec<Query> = equalities.to_vec();
    while !pending.is_empty() {
        let pick = pending.iter().position(|e| match e {
            Query::Eq(x, Term::Var(y)) => scope.contains(x) || scope.contains(y),
            Query::MulEq { lhs, rhs, .. } => scope.contains(lhs) && scope.contains(rhs),
            _ => false,
        })?;
        let e = pending.remove(pick);
        scope.extend(e.fv());
        conjuncts.push(e);
    }
    for ne in neg_equalities {
        if !ne.fv().is_subset(&scope) {
            return None;
        }
        conjuncts.push(ne.clone());
    }
    for (i, n) in negations.iter().enumerate() {
        let _ = i;
        if !n.fv().is_subset(&scope) {
            return None;
        }
        conjuncts.push(not(n.clone()));
    }
    if conjuncts.is_empty() {
        return Some(Query::True);
    }
    Some(and_all(conjuncts))
}

/// Minimal subsets of `pool` satisfying `pred`, in deterministic order
/// (by size, then by index mask).
fn minimal_subsets<F>(pool: &[Query], pred: F) -> Vec<Vec<Query>>
where
    F: Fn(&[Query]) -> bool,
{
    let n = pool.len();
    if n > 16 {
        // fall back to the full set to avoid exponential enumeration
        return if pred(pool) {
            vec![pool.to_vec()]
        } else {
            vec![]
        };
    }
    let mut minimal_masks: Vec<u32> = Vec::new();
    let mut out = Vec::new();
    let mut masks: Vec<u32> = (0u32..(1 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        if minimal_masks.iter().any(|mm| mm & mask == *mm) {
            continue;
        }
        let subset: Vec<Query> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| pool[i].clone())
            .collect();
        if pred(&subset) {
            minimal_masks.push(mask);
            out.push(subset);
            if out.len() >= 64 {
                break;
            }
        }
    }
    out
}

/// Full lowering of a safe-range query to RANF via SRNF.
pub fn sr2ranf_qry(q: &Query, training: &Structure) -> Result<Query, NormalizeError> {
    let normalized = srnf(q);
    let mut ctx = NormCtx::new(training);
    let (hat, _) = sr2ranf(&normalized, &[], &mut ctx)?;
    debug_assert!(is_ranf(&hat), "lowering must produce RANF");
    Ok(hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query_infer;
    use crate::printer::print_query;
    use crate::syntax::*;

    fn parse(text: &str) -> Query {
        parse_query_infer(text).unwrap().0
    }

    #[test]
    fn srnf_examples() {
        assert_eq!(srnf(&parse("NOT NOT B(x)")), parse("B(x)"));
        assert_eq!(
            srnf(&parse("NOT (B(x) OR P1(y))")),
            parse("NOT B(x) AND NOT P1(y)")
        );
        assert_eq!(
            srnf(&parse("EXISTS x. B(x) OR P2(x, y)")),
            parse("(EXISTS x. B(x)) OR (EXISTS x. P2(x, y))")
        );
        assert_eq!(srnf(&parse("EXISTS y. B(x)")), parse("B(x)"));
    }

    #[test]
    fn srnf_output_shape() {
        let samples = [
            "NOT (B(x) AND (P1(y) OR NOT B(y)))",
            "FORALL p. P(b, p) -> S(p, u, s)",
            "NOT EXISTS x. NOT (B(x) OR NOT P1(x))",
        ];
        for text in samples {
            let out = srnf(&parse(text));
            assert!(is_srnf(&out), "not SRNF: {}", print_query(&out));
            assert_eq!(out.fv(), parse(text).fv());
        }
    }

    #[test]
    fn lowers_negated_conjunction_by_distribution() {
        let q = parse("P2(x, y) AND NOT (P1(x) AND P1(y))");
        let training = Structure::new();
        let out = sr2ranf_qry(&q, &training).unwrap();
        assert_eq!(
            print_query(&out),
            "((P2(x, y) AND (NOT P1(x))) OR (P2(x, y) AND (NOT P1(y))))"
        );
    }

    #[test]
    fn already_ranf_is_returned_directly() {
        let q = parse("B(x)");
        let training = Structure::new();
        let mut ctx = NormCtx::new(&training);
        let (hat, absorbed) = sr2ranf(&q, &[], &mut ctx).unwrap();
        assert_eq!(hat, q);
        assert!(absorbed.is_empty());
    }

    #[test]
    fn equality_case_conjoins_restrictor() {
        let q = parse("x = y");
        let b = parse("B(x)");
        let training = Structure::new();
        let mut ctx = NormCtx::new(&training);
        let (hat, absorbed) = sr2ranf(&q, std::slice::from_ref(&b), &mut ctx).unwrap();
        assert_eq!(print_query(&hat), "(B(x) AND x = y)");
        assert!(is_ranf(&hat));
        assert_eq!(absorbed, vec![b]);
    }

    #[test]
    fn equality_chain_is_ordered_for_ranf() {
        let q = parse("B(x) AND x = y AND y = z");
        let out = sr2ranf_qry(&q, &Structure::new()).unwrap();
        assert!(is_ranf(&out));
        // the shuffled variant lowers to the same RANF-orderable conjunction
        let shuffled = parse("B(x) AND y = z AND x = y");
        let out2 = sr2ranf_qry(&shuffled, &Structure::new()).unwrap();
        assert!(is_ranf(&out2));
    }

    #[test]
    fn bottom_is_preserved() {
        assert_eq!(sr2ranf_qry(&Query::False, &Structure::new()).unwrap(), Query::False);
    }

    #[test]
    fn reports_unlowerable_queries() {
        let q = parse("NOT B(x)");
        assert!(sr2ranf_qry(&q, &Structure::new()).is_err());
    }
}

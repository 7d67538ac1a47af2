//! Ground-truth evaluation: brute-force finite-domain enumeration, the
//! production bottom-up RANF evaluator, and the query-cost metric.

use crate::atom::Atom;
use crate::ranges::is_ranf;
use crate::structure::{Relation, Structure, Tuple};
use crate::syntax::{Query, Term, Var};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Default cap on brute-force enumeration work.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    Budget { spent: u64, limit: u64 },
    NotRanf,
    MissingRelation(String),
    ArityMismatch { relation: String, expected: usize, got: usize },
    CountOverflow,
    Unsupported(&'static str),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Budget { spent, limit } => {
                write!(f, "evaluation budget exceeded ({spent} > {limit})")
            }
            EvalError::NotRanf => write!(f, "query is not in relational algebra normal form"),
            EvalError::MissingRelation(r) => write!(f, "relation {r} not present in structure"),
            EvalError::ArityMismatch {
                relation,
                expected,
                got,
            } => write!(
                f,
                "arity mismatch for {relation}: stored {expected}, used with {got}"
            ),
            EvalError::CountOverflow => write!(f, "count aggregation overflowed"),
            EvalError::Unsupported(what) => write!(f, "unsupported query form: {what}"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Active domain: the query's constants interpreted by the structure plus
/// every atom stored under a predicate symbol the query mentions.
pub fn adom(q: &Query, s: &Structure) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    collect_adom(q, s, &mut out);
    out
}

fn collect_adom(q: &Query, s: &Structure, out: &mut BTreeSet<Atom>) {
    match q {
        Query::Eq(_, Term::Const(a)) => {
            out.insert(s.interpret_const(a));
        }
        Query::Pred(name, args) => {
            for t in args {
                if let Term::Const(a) = t {
                    out.insert(s.interpret_const(a));
                }
            }
            if let Some(tuples) = s.relation(name) {
                for t in tuples {
                    out.extend(t.iter().cloned());
                }
            }
        }
        Query::Not(q1) | Query::Exists(_, q1) => collect_adom(q1, s, out),
        Query::Or(a, b) | Query::And(a, b) => {
            collect_adom(a, s, out);
            collect_adom(b, s, out);
        }
        Query::CntAgg { body, .. } => collect_adom(body, s, out),
        _ => {}
    }
}

struct Counter {
    spent: u64,
    limit: u64,
}

impl Counter {
    fn spend(&mut self, amount: u64) -> Result<(), EvalError> {
        self.spent = self.spent.saturating_add(amount);
        if self.spent > self.limit {
            Err(EvalError::Budget {
                spent: self.spent,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }
}

/// Brute-force evaluation of an arbitrary query with all quantifiers ranging
/// over the explicit finite domain `dom`.
pub fn eval_fin_dom(
    q: &Query,
    s: &Structure,
    dom: &BTreeSet<Atom>,
) -> Result<Relation, EvalError> {
    eval_fin_dom_budget(q, s, dom, DEFAULT_BUDGET)
}

pub fn eval_fin_dom_budget(
    q: &Query,
    s: &Structure,
    dom: &BTreeSet<Atom>,
    budget: u64,
) -> Result<Relation, EvalError> {
    let fv = q.fvseq();
    let universe: Vec<Atom> = dom.iter().cloned().collect();
    let mut counter = Counter {
        spent: 0,
        limit: budget,
    };
    let combos = (universe.len() as u64)
        .checked_pow(fv.len() as u32)
        .unwrap_or(u64::MAX);
    if combos > budget {
        return Err(EvalError::Budget {
            spent: combos,
            limit: budget,
        });
    }
    let mut rel = Relation::new(fv.clone());
    let mut assignment: BTreeMap<Var, Atom> = BTreeMap::new();
    enumerate(
        q,
        s,
        &universe,
        &fv,
        0,
        &mut assignment,
        &mut rel,
        &mut counter,
    )?;
    Ok(rel)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    q: &Query,
    s: &Structure,
    universe: &[Atom],
    fv: &[Var],
    i: usize,
    assignment: &mut BTreeMap<Var, Atom>,
    rel: &mut Relation,
    counter: &mut Counter,
) -> Result<(), EvalError> {
    if i == fv.len() {
        counter.spend(1)?;
        if sat(q, s, universe, assignment, counter)? {
            rel.rows
                .insert(fv.iter().map(|v| assignment[v].clone()).collect());
        }
        return Ok(());
    }
    for a in universe {
        assignment.insert(fv[i].clone(), a.clone());
        enumerate(q, s, universe, fv, i + 1, assignment, rel, counter)?;
    }
    assignment.remove(&fv[i]);
    Ok(())
}

fn term_value(t: &Term, s: &Structure, assignment: &BTreeMap<Var, Atom>) -> Atom {
    match t {
        Term::Var(v) => assignment
            .get(v)
            .cloned()
            .expect("unassigned free variable"),
        Term::Const(a) => s.interpret_const(a),
    }
}

fn sat(
    q: &Query,
    s: &Structure,
    universe: &[Atom],
    assignment: &mut BTreeMap<Var, Atom>,
    counter: &mut Counter,
) -> Result<bool, EvalError> {
    counter.spend(1)?;
    match q {
        Query::False => Ok(false),
        Query::True => Ok(true),
        Query::Eq(x, t) => {
            let lhs = assignment.get(x).cloned().expect("unassigned variable");
            Ok(lhs == term_value(t, s, assignment))
        }
        Query::MulEq { result, lhs, rhs } => {
            let r = assignment.get(result).cloned();
            let a = assignment.get(lhs).cloned();
            let b = assignment.get(rhs).cloned();
            match (r, a, b) {
                (Some(Atom::Int(r)), Some(Atom::Int(a)), Some(Atom::Int(b))) => {
                    let prod = a.checked_mul(b).ok_or(EvalError::CountOverflow)?;
                    Ok(r == prod)
                }
                _ => Ok(false),
            }
        }
        Query::Pred(name, args) => {
            let tuple: Tuple = args.iter().map(|t| term_value(t, s, assignment)).collect();
            Ok(s.relation(name).map(|r| r.contains(&tuple)).unwrap_or(false))
        }
        Query::Not(inner) => Ok(!sat(inner, s, universe, assignment, counter)?),
        Query::Or(a, b) => Ok(sat(a, s, universe, assignment, counter)?
            || sat(b, s, universe, assignment, counter)?),
        Query::And(a, b) => Ok(sat(a, s, universe, assignment, counter)?
            && sat(b, s, universe, assignment, counter)?),
        Query::Exists(x, body) => {
            let saved = assignment.get(x).cloned();
            let mut found = false;
            for a in universe {
                assignment.insert(x.clone(), a.clone());
                if sat(body, s, universe, assignment, counter)? {
                    found = true;
                    break;
                }
            }
            restore(assignment, x, saved);
            Ok(found)
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let expected = match assignment.get(result) {
                Some(Atom::Int(v)) => *v,
                _ => return Ok(false),
            };
            let mut count: i64 = 0;
            let saved: Vec<(Var, Option<Atom>)> = bound
                .iter()
                .map(|v| (v.clone(), assignment.get(v).cloned()))
                .collect();
            count_assignments(body, s, universe, bound, 0, assignment, &mut count, counter)?;
            for (v, old) in saved {
                restore(assignment, &v, old);
            }
            if count == 0 {
                let fvb = body.fv();
                let grouped = fvb.iter().any(|v| !bound.contains(v));
                if grouped {
                    return Ok(false);
                }
            }
            Ok(expected == count)
        }
    }
}

fn restore(assignment: &mut BTreeMap<Var, Atom>, v: &str, old: Option<Atom>) {
    match old {
        Some(a) => {
            assignment.insert(v.to_string(), a);
        }
        None => {
            assignment.remove(v);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn count_assignments(
    body: &Query,
    s: &Structure,
    universe: &[Atom],
    bound: &[Var],
    i: usize,
    assignment: &mut BTreeMap<Var, Atom>,
    count: &mut i64,
    counter: &mut Counter,
) -> Result<(), EvalError> {
    if i == bound.len() {
        if sat(body, s, universe, assignment, counter)? {
            *count = count.checked_add(1).ok_or(EvalError::CountOverflow)?;
        }
        return Ok(());
    }
    for a in universe {
        assignment.insert(bound[i].clone(), a.clone());
        count_assignments(body, s, universe, bound, i + 1, assignment, count, counter)?;
    }
    Ok(())
}

/// Bottom-up evaluation of a RANF query: conjunction becomes natural join,
/// conjunction with a negation an anti-join, equality conjuncts column
/// duplication or selection, disjunction union, quantification projection.
pub fn eval_ranf(q: &Query, s: &Structure) -> Result<Relation, EvalError> {
    if !is_ranf(q) {
        return Err(EvalError::NotRanf);
    }
    eval_ranf_unchecked(q, s)
}

pub(crate) fn eval_ranf_unchecked(q: &Query, s: &Structure) -> Result<Relation, EvalError> {
    let fv = q.fvseq();
    let rel = match q {
        Query::False => Relation::new(vec![]),
        Query::True => Relation::unit(),
        Query::Eq(x, Term::Const(c)) => Relation::with_rows(
            vec![x.clone()],
            [vec![s.interpret_const(c)]],
        ),
        Query::Eq(..) | Query::MulEq { .. } => return Err(EvalError::NotRanf),
        Query::Pred(name, args) => eval_pred(name, args, s)?,
        Query::Not(inner) => {
            let r = eval_ranf_unchecked(inner, s)?;
            if r.is_empty() {
                Relation::unit()
            } else {
                Relation::new(vec![])
            }
        }
        Query::Or(a, b) => {
            let left = eval_ranf_unchecked(a, s)?;
            let right = eval_ranf_unchecked(b, s)?;
            let mut out = left.project(&fv);
            out.rows.extend(right.project(&fv).rows);
            out
        }
        Query::And(a, b) => {
            let left = eval_ranf_unchecked(a, s)?;
            match b.as_ref() {
                Query::Eq(x, Term::Var(y)) if x != y => {
                    apply_var_eq(left, x, y)
                }
                Query::Not(inner) => match inner.as_ref() {
                    Query::Eq(x, Term::Var(y)) if x != y => {
                        let xi = left.col_index(x).ok_or(EvalError::NotRanf)?;
                        let yi = left.col_index(y).ok_or(EvalError::NotRanf)?;
                        let rows = left.rows.iter().filter(|r| r[xi] != r[yi]).cloned();
                        Relation::with_rows(left.columns.clone(), rows)
                    }
                    _ => {
                        let right = eval_ranf_unchecked(inner, s)?;
                        anti_join(&left, &right)
                    }
                },
                Query::MulEq { result, lhs, rhs } => {
                    apply_mul_eq(left, result, lhs, rhs)?
                }
                _ => {
                    let right = eval_ranf_unchecked(b, s)?;
                    natural_join(&left, &right)
                }
            }
        }
        Query::Exists(_, body) => {
            let r = eval_ranf_unchecked(body, s)?;
            r.project(&fv)
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let r = eval_ranf_unchecked(body, s)?;
            count_groups(&r, result, bound)?
        }
    };
    Ok(if rel.columns == fv { rel } else { rel.project(&fv) })
}

fn eval_pred(name: &str, args: &[Term], s: &Structure) -> Result<Relation, EvalError> {
    let tuples = s
        .relation(name)
        .ok_or_else(|| EvalError::MissingRelation(name.to_string()))?;
    if let Some(t) = tuples.iter().next() {
        if t.len() != args.len() {
            return Err(EvalError::ArityMismatch {
                relation: name.to_string(),
                expected: t.len(),
                got: args.len(),
            });
        }
    }
    let mut cols: Vec<Var> = Vec::new();
    for t in args {
        if let Term::Var(v) = t {
            if !cols.contains(v) {
                cols.push(v.clone());
            }
        }
    }
    let mut rel = Relation::new(cols.clone());
    'next: for tuple in tuples {
        let mut binding: BTreeMap<&str, &Atom> = BTreeMap::new();
        for (t, val) in args.iter().zip(tuple.iter()) {
            match t {
                Term::Const(c) => {
                    if s.interpret_const(c) != *val {
                        continue 'next;
                    }
                }
                Term::Var(v) => match binding.get(v.as_str()) {
                    Some(prev) => {
                        if *prev != val {
                            continue 'next;
                        }
                    }
                    None => {
                        binding.insert(v, val);
                    }
                },
            }
        }
        rel.rows
            .insert(cols.iter().map(|c| binding[c.as_str()].clone()).collect());
    }
    Ok(rel)
}

fn apply_var_eq(left: Relation, x: &str, y: &str) -> Relation {
    let xi = left.col_index(x);
    let yi = left.col_index(y);
    match (xi, yi) {
        (Some(xi), Some(yi)) => {
            let rows = left.rows.iter().filter(|r| r[xi] == r[yi]).cloned();
            Relation::with_rows(left.columns.clone(), rows)
        }
        (Some(xi), None) => {
            let mut cols = left.columns.clone();
            cols.push(y.to_string());
            let rows = left.rows.iter().map(|r| {
                let mut row = r.clone();
                row.push(r[xi].clone());
                row
            });
            Relation::with_rows(cols, rows)
        }
        (None, Some(yi)) => {
            let mut cols = left.columns.clone();
            cols.push(x.to_string());
            let rows = left.rows.iter().map(|r| {
                let mut row = r.clone();
                row.push(r[yi].clone());
                row
            });
            Relation::with_rows(cols, rows)
        }
        (None, None) => Relation::new(left.columns.clone()),
    }
}

fn apply_mul_eq(
    left: Relation,
    result: &str,
    lhs: &str,
    rhs: &str,
) -> Result<Relation, EvalError> {
    let li = left.col_index(lhs).ok_or(EvalError::NotRanf)?;
    let ri = left.col_index(rhs).ok_or(EvalError::NotRanf)?;
    let product = |row: &Tuple| -> Result<Option<Atom>, EvalError> {
        match (&row[li], &row[ri]) {
            (Atom::Int(a), Atom::Int(b)) => Ok(Some(Atom::Int(
                a.checked_mul(*b).ok_or(EvalError::CountOverflow)?,
            ))),
            _ => Ok(None),
        }
    };
    if let Some(ci) = left.col_index(result) {
        let mut out = Relation::new(left.columns.clone());
        for row in &left.rows {
            if let Some(p) = product(row)? {
                if row[ci] == p {
                    out.rows.insert(row.clone());
                }
            }
        }
        Ok(out)
    } else {
        let mut cols = left.columns.clone();
        cols.push(result.to_string());
        let mut out = Relation::new(cols);
        for row in &left.rows {
            if let Some(p) = product(row)? {
                let mut r = row.clone();
                r.push(p);
                out.rows.insert(r);
            }
        }
        Ok(out)
    }
}

/// Natural join on shared column names (Cartesian product when disjoint).
pub fn natural_join(left: &Relation, right: &Relation) -> Relation {
    let shared: Vec<(usize, usize)> = left
        .columns
        .iter()
        .enumerate()
        .filter_map(|(i, c)| right.col_index(c).map(|j| (i, j)))
        .collect();
    let right_extra: Vec<usize> = right
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !left.columns.contains(c))
        .map(|(j, _)| j)
        .collect();
    let mut cols = left.columns.clone();
    cols.extend(right_extra.iter().map(|&j| right.columns[j].clone()));
    let mut out = Relation::new(cols);

    // index the right side on the shared key
    let mut index: BTreeMap<Tuple, Vec<&Tuple>> = BTreeMap::new();
    for row in &right.rows {
        let key: Tuple = shared.iter().map(|&(_, j)| row[j].clone()).collect();
        index.entry(key).or_default().push(row);
    }
    for lrow in &left.rows {
        let key: Tuple = shared.iter().map(|&(i, _)| lrow[i].clone()).collect();
        if let Some(matches) = index.get(&key) {
            for rrow in matches {
                let mut row = lrow.clone();
                row.extend(right_extra.iter().map(|&j| rrow[j].clone()));
                out.rows.insert(row);
            }
        }
    }
    out
}

/// Keeps left rows with no matching right row; right columns must be a
/// subset of the left columns.
pub fn anti_join(left: &Relation, right: &Relation) -> Relation {
    let idx: Vec<usize> = right
        .columns
        .iter()
        .map(|c| left.col_index(c).expect("anti-join columns must nest"))
        .collect();
    let rows = left
        .rows
        .iter()
        .filter(|lrow| {
            let key: Tuple = idx.iter().map(|&i| lrow[i].clone()).collect();
            !right.rows.contains(&key)
        })
        .cloned();
    Relation::with_rows(left.columns.clone(), rows)
}

fn count_groups(body: &Relation, result: &str, bound: &[Var]) -> Result<Relation, EvalError> {
    let group_cols: Vec<Var> = body
        .columns
        .iter()
        .filter(|c| !bound.contains(c))
        .cloned()
        .collect();
    let group_idx: Vec<usize> = group_cols
        .iter()
        .map(|c| body.col_index(c).unwrap())
        .collect();
    let mut counts: BTreeMap<Tuple, i64> = BTreeMap::new();
    for row in &body.rows {
        let key: Tuple = group_idx.iter().map(|&i| row[i].clone()).collect();
        let slot = counts.entry(key).or_insert(0);
        *slot = slot.checked_add(1).ok_or(EvalError::CountOverflow)?;
    }
    if group_cols.is_empty() && counts.is_empty() {
        counts.insert(vec![], 0);
    }
    let mut cols = group_cols;
    cols.push(result.to_string());
    let rows = counts.into_iter().map(|(mut key, n)| {
        key.push(Atom::Int(n));
        key
    });
    Ok(Relation::with_rows(cols, rows))
}

/// Query cost: the sum of `|result| * |free variables|` over all distinct
/// RANF subqueries. Predicates absent from the structure count as empty.
pub fn cost(q: &Query, s: &Structure) -> Result<u64, EvalError> {
    if !is_ranf(q) {
        return Err(EvalError::NotRanf);
    }
    let padded = pad_missing(q, s);
    let s = padded.as_ref().unwrap_or(s);
    let mut total: u64 = 0;
    for sub in q.subqueries() {
        if is_ranf(&sub) {
            let r = eval_ranf_unchecked(&sub, s)?;
            total = total
                .saturating_add((r.len() as u64).saturating_mul(sub.fv().len() as u64));
        }
    }
    Ok(total)
}

fn pad_missing(q: &Query, s: &Structure) -> Option<Structure> {
    let mut missing = Vec::new();
    for sub in q.subqueries() {
        if let Query::Pred(name, _) = &sub {
            if s.relation(name).is_none() {
                missing.push(name.clone());
            }
        }
    }
    if missing.is_empty() {
        return None;
    }
    let mut padded = s.clone();
    for name in missing {
        padded.interps.entry(name).or_default();
    }
    Some(padded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    fn atoms(vals: &[i64]) -> BTreeSet<Atom> {
        vals.iter().map(|&v| Atom::Int(v)).collect()
    }

    fn b(v: &str) -> Query {
        pred("B", vec![var(v)])
    }

    #[test]
    fn adom_examples() {
        let s = Structure::new().with_relation("B", [vec![Atom::int(1)], vec![Atom::int(2)]]);
        assert_eq!(adom(&b("x"), &s), atoms(&[1, 2]));
        let q = eq("x", cst(Atom::int(5)));
        assert_eq!(adom(&q, &s), atoms(&[5]));
    }

    #[test]
    fn fin_dom_negated_triple_counts() {
        // |sat(NOT S(x,y,z))| over dom = |dom|^3 - |dom| with the diagonal stored
        for n in [3usize, 5] {
            let dom: BTreeSet<Atom> = (0..n as i64).map(Atom::Int).collect();
            let s = Structure::new().with_relation(
                "S",
                dom.iter().map(|a| vec![a.clone(), a.clone(), a.clone()]),
            );
            let q = not(pred("S", vec![var("x"), var("y"), var("z")]));
            let r = eval_fin_dom(&q, &s, &dom).unwrap();
            assert_eq!(r.len(), n.pow(3) - n);
        }
    }

    #[test]
    fn fin_dom_trivial_cases() {
        let dom = atoms(&[1, 2]);
        let s = Structure::new();
        let r = eval_fin_dom(&Query::True, &s, &dom).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.columns.len(), 0);
        let contradiction = and(b("x"), not(b("x")));
        let s = Structure::new().with_relation("B", [vec![Atom::int(1)]]);
        let r = eval_fin_dom(&contradiction, &s, &dom).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let dom: BTreeSet<Atom> = (0..100i64).map(Atom::Int).collect();
        let q = pred("R", vec![var("a"), var("b"), var("c"), var("d")]);
        let err = eval_fin_dom_budget(&q, &Structure::new(), &dom, 1000).unwrap_err();
        assert!(matches!(err, EvalError::Budget { .. }));
    }

    #[test]
    fn ranf_anti_join() {
        let s = Structure::new()
            .with_relation("B", [vec![Atom::int(1)], vec![Atom::int(2)]])
            .with_relation("P1", [vec![Atom::int(2)]]);
        let q = and(b("x"), not(pred("P1", vec![var("x")])));
        let r = eval_ranf(&q, &s).unwrap();
        assert_eq!(r.rows, [vec![Atom::int(1)]].into_iter().collect());
    }

    #[test]
    fn ranf_count_aggregation() {
        let s = Structure::new().with_relation(
            "P2",
            [
                vec![Atom::int(1), Atom::int(2)],
                vec![Atom::int(1), Atom::int(3)],
            ],
        );
        let q = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(pred("P2", vec![var("x"), var("y")])),
        };
        let r = eval_ranf(&q, &s).unwrap();
        assert_eq!(r.columns, vec!["c".to_string(), "x".to_string()]);
        assert_eq!(r.rows, [vec![Atom::int(2), Atom::int(1)]].into_iter().collect());
    }

    #[test]
    fn zero_count_row_for_closed_groups() {
        let s = Structure::new().with_relation("P1", Vec::<Tuple>::new());
        let q = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(pred("P1", vec![var("y")])),
        };
        let r = eval_ranf(&q, &s).unwrap();
        assert_eq!(r.rows, [vec![Atom::int(0)]].into_iter().collect());
    }

    #[test]
    fn cost_examples() {
        let s = Structure::new().with_relation(
            "B",
            [vec![Atom::int(1)], vec![Atom::int(2)], vec![Atom::int(3)]],
        );
        assert_eq!(cost(&b("x"), &s).unwrap(), 3);
        assert_eq!(cost(&Query::True, &s).unwrap(), 0);
    }

    #[test]
    fn cost_counts_repeated_subqueries_once() {
        // (B(x,y) ∧ ¬C(x)) ∨ (B(x,y) ∧ ¬C(y)): B contributes a single term
        let s = Structure::new()
            .with_relation(
                "B2",
                [
                    vec![Atom::int(1), Atom::int(2)],
                    vec![Atom::int(2), Atom::int(3)],
                ],
            )
            .with_relation("C", [vec![Atom::int(1)]]);
        let b2 = pred("B2", vec![var("x"), var("y")]);
        let q = or(
            and(b2.clone(), not(pred("C", vec![var("x")]))),
            and(b2.clone(), not(pred("C", vec![var("y")]))),
        );
        // B2: 2 rows * 2 vars = 4 (once); C(x): 1; C(y): 1;
        // first conjunction: 1 row * 2 = 2; second: 2 rows * 2 = 4; whole: 2 rows * 2 = 4
        assert_eq!(cost(&q, &s).unwrap(), 4 + 1 + 1 + 2 + 4 + 4);
    }

    #[test]
    fn ranf_equality_duplication_chain() {
        let s = Structure::new().with_relation("B", [vec![Atom::int(7)]]);
        let q = and(and(b("x"), eq("x", var("y"))), eq("y", var("z")));
        let r = eval_ranf(&q, &s).unwrap();
        assert_eq!(
            r.rows,
            [vec![Atom::int(7), Atom::int(7), Atom::int(7)]].into_iter().collect()
        );
    }

    #[test]
    fn repeated_variables_in_atom_select_diagonal() {
        let s = Structure::new().with_relation(
            "P2",
            [
                vec![Atom::int(1), Atom::int(1)],
                vec![Atom::int(1), Atom::int(2)],
            ],
        );
        let q = pred("P2", vec![var("x"), var("x")]);
        let r = eval_ranf(&q, &s).unwrap();
        assert_eq!(r.rows, [vec![Atom::int(1)]].into_iter().collect());
    }
}

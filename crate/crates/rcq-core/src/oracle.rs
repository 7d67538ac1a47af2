//! Capturability oracle: decides whether a query's satisfying set over an
//! infinite domain is finite, and enumerates it when it is.
//!
//! The oracle extends the active domain with fresh atoms (one more than the
//! number of variables in the query) and evaluates over the extended finite
//! domain; a satisfying tuple containing a fresh atom witnesses infinitely
//! many satisfying tuples by genericity.
//!
//! To stay feasible on larger structures, evaluation represents each
//! subquery's satisfying set either directly or as a complement relative to
//! the extended domain, so negation costs nothing and complements are never
//! materialized except where a conjunction genuinely demands it.

use crate::atom::Atom;
use crate::eval::{adom, natural_join, anti_join, EvalError, DEFAULT_BUDGET};
use crate::structure::{Relation, Structure, Tuple};
use crate::syntax::{Query, Term, Var};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaptureResult {
    Finite(Relation),
    Infinite,
}

impl CaptureResult {
    pub fn is_infinite(&self) -> bool {
        matches!(self, CaptureResult::Infinite)
    }
}

/// A relation plus a complement flag: the denoted set of assignments is
/// `rows` or `dom^k \ rows`.
#[derive(Clone, Debug)]
struct Signed {
    rel: Relation,
    complemented: bool,
}

impl Signed {
    fn pos(rel: Relation) -> Self {
        Signed {
            rel,
            complemented: false,
        }
    }
}

struct OracleCtx<'a> {
    s: &'a Structure,
    dom: Vec<Atom>,
    budget: u64,
    spent: u64,
}

impl<'a> OracleCtx<'a> {
    fn charge(&mut self, amount: u64) -> Result<(), EvalError> {
        self.spent = self.spent.saturating_add(amount);
        if self.spent > self.budget {
            Err(EvalError::Budget {
                spent: self.spent,
                limit: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn eval(&mut self, q: &Query) -> Result<Signed, EvalError> {
        let fv = q.fvseq();
        let out = match q {
            Query::False => Signed::pos(Relation::new(vec![])),
            Query::True => Signed::pos(Relation::unit()),
            Query::Eq(x, Term::Const(c)) => Signed::pos(Relation::with_rows(
                vec![x.clone()],
                [vec![self.s.interpret_const(c)]],
            )),
            Query::Eq(x, Term::Var(y)) => {
                if x == y {
                    Signed::pos(Relation::unit())
                } else {
                    self.charge(self.dom.len() as u64)?;
                    let rows = self.dom.iter().map(|a| vec![a.clone(), a.clone()]);
                    let diag = Relation::with_rows(
                        vec![x.clone().min(y.clone()), x.clone().max(y.clone())],
                        rows,
                    );
                    Signed::pos(diag.project(&fv))
                }
            }
            Query::Pred(..) => {
                let rel = crate::eval::eval_ranf_unchecked(q, self.s)?;
                Signed::pos(rel)
            }
            Query::Not(inner) => {
                let mut r = self.eval(inner)?;
                r.complemented = !r.complemented;
                r
            }
            Query::And(..) => {
                let parts = q.flat_and();
                let evaled: Vec<Signed> = parts
                    .iter()
                    .map(|p| self.eval(p))
                    .collect::<Result<_, _>>()?;
                self.combine_conjunction(evaled, &fv)?
            }
            Query::Or(..) => {
                let parts = q.flat_or();
                let evaled: Vec<Signed> = parts
                    .iter()
                    .map(|p| {
                        self.eval(p).map(|mut r| {
                            r.complemented = !r.complemented;
                            r
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let mut conj = self.combine_conjunction(evaled, &fv)?;
                conj.complemented = !conj.complemented;
                conj
            }
            Query::Exists(x, body) => {
                let r = self.eval(body)?;
                self.project_out(r, x, &fv)?
            }
            Query::CntAgg { .. } => {
                return Err(EvalError::Unsupported(
                    "count aggregation in the finiteness oracle",
                ))
            }
            Query::MulEq { .. } => {
                return Err(EvalError::Unsupported(
                    "arithmetic constraints in the finiteness oracle",
                ))
            }
        };
        Ok(out)
    }

    /// Extends a positive relation with every domain value for each missing
    /// column in `target`.
    fn lift(&mut self, rel: Relation, target: &[Var]) -> Result<Relation, EvalError> {
        let missing: Vec<Var> = target
            .iter()
            .filter(|c| !rel.columns.contains(c))
            .cloned()
            .collect();
        if missing.is_empty() {
            return Ok(rel);
        }
        let growth = (self.dom.len() as u64)
            .checked_pow(missing.len() as u32)
            .unwrap_or(u64::MAX);
        self.charge((rel.len().max(1) as u64).saturating_mul(growth))?;
        let mut rows: Vec<Tuple> = rel.rows.into_iter().collect();
        let mut cols = rel.columns;
        for m in missing {
            cols.push(m);
            let mut next = Vec::with_capacity(rows.len() * self.dom.len());
            for row in &rows {
                for a in &self.dom {
                    let mut r = row.clone();
                    r.push(a.clone());
                    next.push(r);
                }
            }
            rows = next;
        }
        Ok(Relation::with_rows(cols, rows))
    }

    /// Materializes `dom^cols` minus nothing. Guarded by the budget.
    fn full_space(&mut self, cols: &[Var]) -> Result<Relation, EvalError> {
        let total = (self.dom.len() as u64)
            .checked_pow(cols.len() as u32)
            .unwrap_or(u64::MAX);
        self.charge(total)?;
        self.lift(Relation::unit(), cols)
    }

    fn combine_conjunction(
        &mut self,
        evaled: Vec<Signed>,
        target: &[Var],
    ) -> Result<Signed, EvalError> {
        let mut positives: Vec<Relation> = Vec::new();
        let mut negatives: Vec<Relation> = Vec::new();
        for r in evaled {
            if r.complemented {
                negatives.push(r.rel);
            } else {
                positives.push(r.rel);
            }
        }
        // all-negative conjunction over identical columns stays symbolic
        if positives.is_empty() {
            if let [first, rest @ ..] = negatives.as_slice() {
                if rest.iter().all(|r| r.columns == first.columns)
                    && first.columns.len() == target.len()
                {
                    let mut union = first.clone();
                    for r in rest {
                        union.rows.extend(r.rows.iter().cloned());
                    }
                    return Ok(Signed {
                        rel: union.project(target),
                        complemented: true,
                    });
                }
            } else {
                return Ok(Signed::pos(Relation::unit()));
            }
            // otherwise materialize the space and subtract
            let mut acc = self.full_space(target)?;
            for n in negatives {
                let lifted_cols: Vec<Var> = n.columns.clone();
                let _ = lifted_cols;
                acc = anti_join(&acc, &n);
            }
            return Ok(Signed::pos(acc));
        }
        positives.sort_by_key(|r| r.len());
        let mut acc = positives.remove(0);
        for p in positives {
            self.charge((acc.len() as u64).saturating_mul(p.len().max(1) as u64))?;
            acc = natural_join(&acc, &p);
        }
        for n in negatives {
            let need: Vec<Var> = acc
                .columns
                .iter()
                .chain(n.columns.iter())
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            acc = self.lift(acc, &need)?;
            acc = anti_join(&acc, &n);
        }
        Ok(Signed::pos(self.lift(acc, target)?.project(target)))
    }

    fn project_out(
        &mut self,
        r: Signed,
        x: &str,
        target: &[Var],
    ) -> Result<Signed, EvalError> {
        if !r.rel.columns.iter().any(|c| c == x) {
            // vacuous binder; adjust columns only
            let rel = if r.complemented {
                r.rel
            } else {
                self.lift(r.rel, target)?
            };
            return Ok(Signed {
                rel: rel.project(target),
                complemented: r.complemented,
            });
        }
        if !r.complemented {
            return Ok(Signed::pos(r.rel.project(target)));
        }
        // ∃x over a complement: groups saturated in x stay excluded
        let keep: Vec<usize> = r
            .rel
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| *c != x)
            .map(|(i, _)| i)
            .collect();
        let mut counts: BTreeMap<Tuple, u64> = BTreeMap::new();
        for row in &r.rel.rows {
            let key: Tuple = keep.iter().map(|&i| row[i].clone()).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        let dom_size = self.dom.len() as u64;
        let cols: Vec<Var> = keep.iter().map(|&i| r.rel.columns[i].clone()).collect();
        let rows = counts
            .into_iter()
            .filter(|(_, n)| *n == dom_size)
            .map(|(k, _)| k);
        Ok(Signed {
            rel: Relation::with_rows(cols, rows).project(target),
            complemented: true,
        })
    }
}

fn fresh_atoms(existing: &BTreeSet<Atom>, count: usize) -> Vec<Atom> {
    let base = existing
        .iter()
        .filter_map(|a| match a {
            Atom::Int(v) => Some(*v),
            Atom::Text(_) => None,
        })
        .max()
        .unwrap_or(0)
        .saturating_add(1);
    (0..count as i64).map(|i| Atom::Int(base + i)).collect()
}

pub fn capture_oracle(q: &Query, s: &Structure) -> Result<CaptureResult, EvalError> {
    capture_oracle_budget(q, s, 0, DEFAULT_BUDGET)
}

/// `extra_fresh` enlarges the fresh-atom set beyond the required
/// `|av ∪ fv| + 1`; the verdict must not depend on it.
pub fn capture_oracle_budget(
    q: &Query,
    s: &Structure,
    extra_fresh: usize,
    budget: u64,
) -> Result<CaptureResult, EvalError> {
    let active = adom(q, s);
    let mut vars = q.av();
    vars.extend(q.fv());
    let fresh = fresh_atoms(&active, vars.len() + 1 + extra_fresh);
    let fresh_set: BTreeSet<Atom> = fresh.iter().cloned().collect();
    let mut dom: Vec<Atom> = active.iter().cloned().collect();
    dom.extend(fresh.iter().cloned());

    let mut ctx = OracleCtx {
        s,
        dom,
        budget,
        spent: 0,
    };
    let result = ctx.eval(q)?;
    let fv = q.fvseq();
    let k = fv.len() as u32;

    let has_fresh = |row: &Tuple| row.iter().any(|a| fresh_set.contains(a));
    if !result.complemented {
        if result.rel.rows.iter().any(&has_fresh) {
            return Ok(CaptureResult::Infinite);
        }
        return Ok(CaptureResult::Finite(result.rel.project(&fv)));
    }

    // complemented result: compare fresh-containing exclusions with the
    // number of fresh-containing points in the whole space
    let dom_n = ctx.dom.len() as u128;
    let adom_n = active.len() as u128;
    let total_fresh = dom_n.pow(k) - adom_n.pow(k);
    let excluded_fresh = result.rel.rows.iter().filter(|r| has_fresh(r)).count() as u128;
    if excluded_fresh < total_fresh {
        return Ok(CaptureResult::Infinite);
    }
    // finite: enumerate the active-domain part not excluded
    let guard = adom_n.pow(k);
    if guard > budget as u128 {
        return Err(EvalError::Budget {
            spent: guard as u64,
            limit: budget,
        });
    }
    let mut out = Relation::new(result.rel.columns.clone());
    let active_vec: Vec<Atom> = active.iter().cloned().collect();
    let width = result.rel.columns.len();
    let mut stack: Vec<Tuple> = vec![vec![]];
    while let Some(t) = stack.pop() {
        if t.len() == width {
            if !result.rel.rows.contains(&t) {
                out.rows.insert(t);
            }
            continue;
        }
        for a in &active_vec {
            let mut next = t.clone();
            next.push(a.clone());
            stack.push(next);
        }
    }
    Ok(CaptureResult::Finite(out.project(&fv)))
}

/// Decides membership of specific assignments (tuples over `fvseq(q)`) in
/// the satisfying set. Atoms outside the active domain are interchangeable
/// by genericity, so they are remapped injectively onto the oracle's fresh
/// atoms before the lookup.
pub fn oracle_check_tuples(
    q: &Query,
    s: &Structure,
    tuples: &[Tuple],
) -> Result<Vec<bool>, EvalError> {
    let active = adom(q, s);
    let mut vars = q.av();
    vars.extend(q.fv());
    let fresh = fresh_atoms(&active, vars.len() + 1);
    let signed = signed_eval(q, s)?;
    let cols = q.fvseq();
    let projected = signed.rel.project(&cols);
    Ok(tuples
        .iter()
        .map(|t| {
            debug_assert_eq!(t.len(), cols.len());
            let mut map: BTreeMap<&Atom, Atom> = BTreeMap::new();
            let mut next = 0usize;
            let remapped: Tuple = t
                .iter()
                .map(|a| {
                    if active.contains(a) {
                        a.clone()
                    } else {
                        map.entry(a)
                            .or_insert_with(|| {
                                let f = fresh[next.min(fresh.len() - 1)].clone();
                                next += 1;
                                f
                            })
                            .clone()
                    }
                })
                .collect();
            projected.rows.contains(&remapped) != signed.complemented
        })
        .collect())
}

/// Satisfying and falsifying assignment counts over the extended domain.
pub fn oracle_sat_counts(q: &Query, s: &Structure) -> Result<(u128, u128), EvalError> {
    let signed = signed_eval(q, s)?;
    counts_of(q, signed)
}

/// Counts over an explicitly supplied domain (a context query's extension).
pub fn oracle_sat_counts_dom(
    q: &Query,
    s: &Structure,
    dom: &BTreeSet<Atom>,
) -> Result<(u128, u128), EvalError> {
    let mut ctx = OracleCtx {
        s,
        dom: dom.iter().cloned().collect(),
        budget: DEFAULT_BUDGET,
        spent: 0,
    };
    let result = ctx.eval(q)?;
    counts_of(
        q,
        SignedOutcome {
            rel: result.rel,
            complemented: result.complemented,
            dom_size: dom.len(),
        },
    )
}

/// The extended domain the oracle uses for a query: its active domain plus
/// one fresh atom per variable and one more.
pub fn oracle_domain(q: &Query, s: &Structure) -> BTreeSet<Atom> {
    let active = adom(q, s);
    let mut vars = q.av();
    vars.extend(q.fv());
    let fresh = fresh_atoms(&active, vars.len() + 1);
    let mut dom = active;
    dom.extend(fresh);
    dom
}

fn counts_of(q: &Query, signed: SignedOutcome) -> Result<(u128, u128), EvalError> {
    let total = (signed.dom_size as u128).pow(q.fv().len() as u32);
    let stored = signed.rel.len() as u128;
    let sat = if signed.complemented {
        total - stored
    } else {
        stored
    };
    Ok((sat, total - sat))
}

struct SignedOutcome {
    rel: Relation,
    complemented: bool,
    dom_size: usize,
}

fn signed_eval(q: &Query, s: &Structure) -> Result<SignedOutcome, EvalError> {
    let active = adom(q, s);
    let mut vars = q.av();
    vars.extend(q.fv());
    let fresh = fresh_atoms(&active, vars.len() + 1);
    let mut dom: Vec<Atom> = active.iter().cloned().collect();
    dom.extend(fresh);
    let dom_size = dom.len();
    let mut ctx = OracleCtx {
        s,
        dom,
        budget: DEFAULT_BUDGET,
        spent: 0,
    };
    let result = ctx.eval(q)?;
    Ok(SignedOutcome {
        rel: result.rel,
        complemented: result.complemented,
        dom_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::*;

    fn b(v: &str) -> Query {
        pred("B", vec![var(v)])
    }

    #[test]
    fn negated_atom_is_infinite() {
        let s = Structure::new().with_relation("B", [vec![Atom::int(1)]]);
        assert_eq!(capture_oracle(&not(b("x")), &s).unwrap(), CaptureResult::Infinite);
    }

    #[test]
    fn positive_atom_is_finite() {
        let s = Structure::new().with_relation("B", [vec![Atom::int(1)], vec![Atom::int(2)]]);
        match capture_oracle(&b("x"), &s).unwrap() {
            CaptureResult::Finite(r) => assert_eq!(r.len(), 2),
            CaptureResult::Infinite => panic!("expected finite"),
        }
    }

    #[test]
    fn relative_safety_depends_on_data() {
        // B(b) ∧ ∃s. ∀p. P(b,p) -> S(p,u,s): finite iff every brand has a product
        let (q, _) = crate::parser::parse_query_infer(
            "B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)",
        )
        .unwrap();
        let covered = Structure::new()
            .with_relation("B", [vec![Atom::int(1)]])
            .with_relation("P", [vec![Atom::int(1), Atom::int(10)]])
            .with_relation(
                "S",
                [vec![Atom::int(10), Atom::int(20), Atom::int(30)]],
            );
        assert!(!capture_oracle(&q, &covered).unwrap().is_infinite());

        let uncovered = Structure::new()
            .with_relation("B", [vec![Atom::int(1)], vec![Atom::int(2)]])
            .with_relation("P", [vec![Atom::int(1), Atom::int(10)]])
            .with_relation(
                "S",
                [vec![Atom::int(10), Atom::int(20), Atom::int(30)]],
            );
        assert!(capture_oracle(&q, &uncovered).unwrap().is_infinite());
    }

    #[test]
    fn agrees_with_naive_enumeration() {
        let s = Structure::new()
            .with_relation("B", [vec![Atom::int(1)], vec![Atom::int(3)]])
            .with_relation(
                "P2",
                [
                    vec![Atom::int(1), Atom::int(2)],
                    vec![Atom::int(3), Atom::int(4)],
                ],
            );
        let queries = [
            "B(x) AND NOT P2(x, y)",
            "B(x) OR P2(x, y)",
            "EXISTS y. P2(x, y)",
            "NOT EXISTS y. P2(x, y) AND NOT B(x)",
            "B(x) AND NOT x = y",
            "B(x) AND FORALL y. P2(x, y) -> B(y)",
        ];
        for text in queries {
            let (q, _) = crate::parser::parse_query_infer(text).unwrap();
            let active = adom(&q, &s);
            let mut vars = q.av();
            vars.extend(q.fv());
            let fresh = fresh_atoms(&active, vars.len() + 1);
            let mut dom = active.clone();
            dom.extend(fresh);
            let naive = crate::eval::eval_fin_dom(&q, &s, &dom).unwrap();
            let mut ctx = OracleCtx {
                s: &s,
                dom: dom.iter().cloned().collect(),
                budget: DEFAULT_BUDGET,
                spent: 0,
            };
            let signed = ctx.eval(&q).unwrap();
            let rows = if signed.complemented {
                let full = crate::eval::eval_fin_dom(&Query::True, &s, &dom).unwrap();
                let _ = full;
                let mut all = BTreeSet::new();
                let cols = signed.rel.columns.clone();
                let domv: Vec<Atom> = dom.iter().cloned().collect();
                let mut stack: Vec<Tuple> = vec![vec![]];
                while let Some(t) = stack.pop() {
                    if t.len() == cols.len() {
                        if !signed.rel.rows.contains(&t) {
                            all.insert(t);
                        }
                        continue;
                    }
                    for a in &domv {
                        let mut n = t.clone();
                        n.push(a.clone());
                        stack.push(n);
                    }
                }
                Relation::with_rows(cols, all).project(&q.fvseq())
            } else {
                signed.rel.project(&q.fvseq())
            };
            assert_eq!(rows.rows, naive.rows, "signed vs naive mismatch on {text}");
        }
    }

    #[test]
    fn verdict_stable_under_extra_fresh_atoms() {
        let s = Structure::new()
            .with_relation("B", [vec![Atom::int(1)]])
            .with_relation("P2", [vec![Atom::int(1), Atom::int(2)]]);
        for text in ["B(x) AND NOT P2(x, y)", "B(x)", "NOT B(x)"] {
            let (q, _) = crate::parser::parse_query_infer(text).unwrap();
            let base = capture_oracle(&q, &s).unwrap();
            let more = capture_oracle_budget(&q, &s, 3, DEFAULT_BUDGET).unwrap();
            assert_eq!(base.is_infinite(), more.is_infinite());
            if let (CaptureResult::Finite(a), CaptureResult::Finite(b)) = (&base, &more) {
                assert_eq!(a.rows, b.rows);
            }
        }
    }
}

//! Relational algebra expressions lowered from RANF queries, plus an
//! in-memory RA evaluator used to cross-check the lowering.
//!
//! Closed queries have no columns in SQL terms, so they are lowered against
//! the auxiliary single-row relation (one designated column) and hold when
//! that row survives.

use crate::atom::Atom;
use crate::eval::{anti_join, natural_join, EvalError};
use crate::ranges::is_ranf;
use crate::structure::{Relation, Structure, Tuple};
use crate::syntax::{Query, Term, Var};
use std::collections::BTreeMap;
use std::fmt::Write;

/// Name of the auxiliary single-row relation.
pub const AUX_RELATION: &str = "rcq_aux";
/// Column carried by lowered closed queries.
pub const AUX_COLUMN: &str = "#t";
/// The designated atom stored in the auxiliary relation.
pub fn aux_atom() -> Atom {
    Atom::Int(0)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SelPred {
    ColEqCol(Var, Var),
    ColEqAtom(Var, Atom),
    /// `result = lhs * rhs`; extends with the product column when `result`
    /// is absent, filters otherwise.
    Product { result: Var, lhs: Var, rhs: Var },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RAExpr {
    Rel { name: String, cols: Vec<Var> },
    AuxA { col: Var },
    /// Single row holding one constant.
    Const { col: Var, value: Atom },
    /// No rows over the given columns.
    Empty { cols: Vec<Var> },
    Project { input: Box<RAExpr>, cols: Vec<Var> },
    DupCol { input: Box<RAExpr>, from: Var, to: Var },
    Select { input: Box<RAExpr>, pred: SelPred },
    Union(Box<RAExpr>, Box<RAExpr>),
    Diff(Box<RAExpr>, Box<RAExpr>),
    Join(Box<RAExpr>, Box<RAExpr>),
    AntiJoin(Box<RAExpr>, Box<RAExpr>),
    Count {
        input: Box<RAExpr>,
        group: Vec<Var>,
        result: Var,
    },
}

impl RAExpr {
    /// Output columns, in order.
    pub fn columns(&self) -> Vec<Var> {
        match self {
            RAExpr::Rel { cols, .. } | RAExpr::Empty { cols } => cols.clone(),
            RAExpr::AuxA { col } | RAExpr::Const { col, .. } => vec![col.clone()],
            RAExpr::Project { cols, .. } => cols.clone(),
            RAExpr::DupCol { input, to, .. } => {
                let mut cols = input.columns();
                cols.push(to.clone());
                cols
            }
            RAExpr::Select { input, pred } => {
                let mut cols = input.columns();
                if let SelPred::Product { result, .. } = pred {
                    if !cols.contains(result) {
                        cols.push(result.clone());
                    }
                }
                cols
            }
            RAExpr::Union(a, _) | RAExpr::Diff(a, _) | RAExpr::AntiJoin(a, _) => a.columns(),
            RAExpr::Join(a, b) => {
                let mut cols = a.columns();
                for c in b.columns() {
                    if !cols.contains(&c) {
                        cols.push(c);
                    }
                }
                cols
            }
            RAExpr::Count { group, result, .. } => {
                let mut cols = group.clone();
                cols.push(result.clone());
                cols
            }
        }
    }

    /// Constructor tree in s-expression form.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out);
        out
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            RAExpr::Rel { name, cols } => {
                let _ = write!(out, "(rel {name} ({}))", cols.join(" "));
            }
            RAExpr::AuxA { col } => {
                let _ = write!(out, "(auxA {col})");
            }
            RAExpr::Const { col, value } => {
                let _ = write!(out, "(const {col} {value})");
            }
            RAExpr::Empty { cols } => {
                let _ = write!(out, "(empty ({}))", cols.join(" "));
            }
            RAExpr::Project { input, cols } => {
                let _ = write!(out, "(project ");
                input.write_sexpr(out);
                let _ = write!(out, " ({}))", cols.join(" "));
            }
            RAExpr::DupCol { input, from, to } => {
                let _ = write!(out, "(dupcol ");
                input.write_sexpr(out);
                let _ = write!(out, " {from} {to})");
            }
            RAExpr::Select { input, pred } => {
                let _ = write!(out, "(select ");
                input.write_sexpr(out);
                match pred {
                    SelPred::ColEqCol(a, b) => {
                        let _ = write!(out, " (= {a} {b}))");
                    }
                    SelPred::ColEqAtom(a, v) => {
                        let _ = write!(out, " (= {a} {v}))");
                    }
                    SelPred::Product { result, lhs, rhs } => {
                        let _ = write!(out, " (* {result} {lhs} {rhs}))");
                    }
                }
            }
            RAExpr::Union(a, b) => Self::write_pair(out, "union", a, b),
            RAExpr::Diff(a, b) => Self::write_pair(out, "diff", a, b),
            RAExpr::Join(a, b) => Self::write_pair(out, "join", a, b),
            RAExpr::AntiJoin(a, b) => Self::write_pair(out, "antijoin", a, b),
            RAExpr::Count {
                input,
                group,
                result,
            } => {
                let _ = write!(out, "(count ");
                input.write_sexpr(out);
                let _ = write!(out, " ({}) {result})", group.join(" "));
            }
        }
    }

    fn write_pair(out: &mut String, tag: &str, a: &RAExpr, b: &RAExpr) {
        let _ = write!(out, "({tag} ");
        a.write_sexpr(out);
        out.push(' ');
        b.write_sexpr(out);
        out.push(')');
    }
}

fn project(e: RAExpr, cols: &[Var]) -> RAExpr {
    if e.columns() == cols {
        e
    } else {
        RAExpr::Project {
            input: Box::new(e),
            cols: cols.to_vec(),
        }
    }
}

fn join(a: RAExpr, b: RAExpr) -> RAExpr {
    RAExpr::Join(Box::new(a), Box::new(b))
}

/// Expected output columns of a lowered query: the free-variable sequence,
/// or the auxiliary column for closed queries.
pub fn lowered_columns(q: &Query) -> Vec<Var> {
    let fv = q.fvseq();
    if fv.is_empty() {
        vec![AUX_COLUMN.to_string()]
    } else {
        fv
    }
}

/// Lowers a RANF query to relational algebra.
pub fn ranf2ra(q: &Query) -> Result<RAExpr, EvalError> {
    if !is_ranf(q) {
        return Err(EvalError::NotRanf);
    }
    Ok(lower(q))
}

fn lower(q: &Query) -> RAExpr {
    let target = lowered_columns(q);
    let raw = match q {
        Query::False => RAExpr::Empty {
            cols: target.clone(),
        },
        Query::True => RAExpr::AuxA {
            col: AUX_COLUMN.to_string(),
        },
        Query::Eq(x, Term::Const(c)) => RAExpr::Const {
            col: x.clone(),
            value: c.clone(),
        },
        Query::Pred(name, args) => lower_pred(name, args),
        Query::Not(inner) => {
            // closed: the aux row survives iff the body is empty
            let aux = RAExpr::AuxA {
                col: AUX_COLUMN.to_string(),
            };
            let body = lower(inner);
            RAExpr::AntiJoin(Box::new(aux), Box::new(body))
        }
        Query::Or(a, b) => {
            let left = project(lower(a), &target);
            let right = project(lower(b), &target);
            RAExpr::Union(Box::new(left), Box::new(right))
        }
        Query::And(a, b) => lower_and(a, b),
        Query::Exists(_, body) => {
            let inner = lower(body);
            if q.fv().is_empty() {
                let aux = RAExpr::AuxA {
                    col: AUX_COLUMN.to_string(),
                };
                project(join(aux, inner), &target)
            } else {
                project(inner, &target)
            }
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let inner = lower(body);
            let group: Vec<Var> = body
                .fvseq()
                .into_iter()
                .filter(|v| !bound.contains(v))
                .collect();
            RAExpr::Count {
                input: Box::new(inner),
                group,
                result: result.clone(),
            }
        }
        Query::Eq(..) | Query::MulEq { .. } => unreachable!("rejected by the RANF check"),
    };
    project(raw, &target)
}

fn lower_pred(name: &str, args: &[Term]) -> RAExpr {
    // positional columns, then selections for constants and repeats
    let mut cols: Vec<Var> = Vec::new();
    let mut selects: Vec<SelPred> = Vec::new();
    let mut seen: BTreeMap<&str, Var> = BTreeMap::new();
    for (i, t) in args.iter().enumerate() {
        match t {
            Term::Var(v) => match seen.get(v.as_str()) {
                Some(first) => {
                    let synth = format!("#{}", i + 1);
                    selects.push(SelPred::ColEqCol(first.clone(), synth.clone()));
                    cols.push(synth);
                }
                None => {
                    seen.insert(v, v.clone());
                    cols.push(v.clone());
                }
            },
            Term::Const(c) => {
                let synth = format!("#{}", i + 1);
                selects.push(SelPred::ColEqAtom(synth.clone(), c.clone()));
                cols.push(synth);
            }
        }
    }
    let mut e = RAExpr::Rel {
        name: name.to_string(),
        cols,
    };
    for pred in selects {
        e = RAExpr::Select {
            input: Box::new(e),
            pred,
        };
    }
    let vars: Vec<Var> = seen.into_values().collect();
    if vars.is_empty() {
        // fully constant atom: nonempty iff the selection survives
        let aux = RAExpr::AuxA {
            col: AUX_COLUMN.to_string(),
        };
        project(join(aux, e), &[AUX_COLUMN.to_string()])
    } else {
        project(e, &vars)
    }
}

fn lower_and(a: &Query, b: &Query) -> RAExpr {
    let left = lower(a);
    match b {
        Query::Eq(x, Term::Var(y)) if x != y => {
            let cols = left.columns();
            let has_x = cols.contains(x);
            let has_y = cols.contains(y);
            match (has_x, has_y) {
                (true, true) => RAExpr::Select {
                    input: Box::new(left),
                    pred: SelPred::ColEqCol(x.clone(), y.clone()),
                },
                (true, false) => RAExpr::DupCol {
                    input: Box::new(left),
                    from: x.clone(),
                    to: y.clone(),
                },
                (false, true) => RAExpr::DupCol {
                    input: Box::new(left),
                    from: y.clone(),
                    to: x.clone(),
                },
                (false, false) => RAExpr::Empty {
                    cols: left.columns(),
                },
            }
        }
        Query::Not(inner) => match inner.as_ref() {
            Query::Eq(x, Term::Var(y)) if x != y => {
                let matching = RAExpr::Select {
                    input: Box::new(left.clone()),
                    pred: SelPred::ColEqCol(x.clone(), y.clone()),
                };
                RAExpr::Diff(Box::new(left), Box::new(matching))
            }
            _ => {
                let right = lower(inner);
                let lcols = left.columns();
                if right
                    .columns()
                    .iter()
                    .all(|c| lcols.contains(c))
                {
                    RAExpr::AntiJoin(Box::new(left), Box::new(right))
                } else {
                    // closed right side carrying the aux column
                    let joined = join(left.clone(), right);
                    let matching = project(joined, &lcols);
                    RAExpr::Diff(Box::new(left), Box::new(matching))
                }
            }
        },
        Query::MulEq { result, lhs, rhs } => RAExpr::Select {
            input: Box::new(left),
            pred: SelPred::Product {
                result: result.clone(),
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            },
        },
        _ => join(left, lower(b)),
    }
}

/// Standard RA evaluation over a structure; the auxiliary relation is
/// interpreted as its designated single row.
pub fn eval_ra(e: &RAExpr, s: &Structure) -> Result<Relation, EvalError> {
    match e {
        RAExpr::Rel { name, cols } => {
            let tuples = s
                .relation(name)
                .ok_or_else(|| EvalError::MissingRelation(name.clone()))?;
            if let Some(t) = tuples.iter().next() {
                if t.len() != cols.len() {
                    return Err(EvalError::ArityMismatch {
                        relation: name.clone(),
                        expected: t.len(),
                        got: cols.len(),
                    });
                }
            }
            Ok(Relation::with_rows(cols.clone(), tuples.iter().cloned()))
        }
        RAExpr::AuxA { col } => Ok(Relation::with_rows(vec![col.clone()], [vec![aux_atom()]])),
        RAExpr::Const { col, value } => Ok(Relation::with_rows(
            vec![col.clone()],
            [vec![s.interpret_const(value)]],
        )),
        RAExpr::Empty { cols } => Ok(Relation::new(cols.clone())),
        RAExpr::Project { input, cols } => Ok(eval_ra(input, s)?.project(cols)),
        RAExpr::DupCol { input, from, to } => {
            let r = eval_ra(input, s)?;
            let fi = r.col_index(from).ok_or(EvalError::NotRanf)?;
            let mut cols = r.columns.clone();
            cols.push(to.clone());
            let rows = r.rows.iter().map(|row| {
                let mut out = row.clone();
                out.push(row[fi].clone());
                out
            });
            Ok(Relation::with_rows(cols, rows))
        }
        RAExpr::Select { input, pred } => {
            let r = eval_ra(input, s)?;
            match pred {
                SelPred::ColEqCol(a, b) => {
                    let ai = r.col_index(a).ok_or(EvalError::NotRanf)?;
                    let bi = r.col_index(b).ok_or(EvalError::NotRanf)?;
                    let rows = r.rows.iter().filter(|row| row[ai] == row[bi]).cloned();
                    Ok(Relation::with_rows(r.columns.clone(), rows))
                }
                SelPred::ColEqAtom(a, v) => {
                    let ai = r.col_index(a).ok_or(EvalError::NotRanf)?;
                    let value = s.interpret_const(v);
                    let rows = r.rows.iter().filter(|row| row[ai] == value).cloned();
                    Ok(Relation::with_rows(r.columns.clone(), rows))
                }
                SelPred::Product { result, lhs, rhs } => {
                    let li = r.col_index(lhs).ok_or(EvalError::NotRanf)?;
                    let ri = r.col_index(rhs).ok_or(EvalError::NotRanf)?;
                    let prod = |row: &Tuple| -> Result<Option<Atom>, EvalError> {
                        match (&row[li], &row[ri]) {
                            (Atom::Int(a), Atom::Int(b)) => Ok(Some(Atom::Int(
                                a.checked_mul(*b).ok_or(EvalError::CountOverflow)?,
                            ))),
                            _ => Ok(None),
                        }
                    };
                    if let Some(ci) = r.col_index(result) {
                        let mut out = Relation::new(r.columns.clone());
                        for row in &r.rows {
                            if prod(row)?.as_ref() == Some(&row[ci]) {
                                out.rows.insert(row.clone());
                            }
                        }
                        Ok(out)
                    } else {
                        let mut cols = r.columns.clone();
                        cols.push(result.clone());
                        let mut out = Relation::new(cols);
                        for row in &r.rows {
                            if let Some(p) = prod(row)? {
                                let mut extended = row.clone();
                                extended.push(p);
                                out.rows.insert(extended);
                            }
                        }
                        Ok(out)
                    }
                }
            }
        }
        RAExpr::Union(a, b) => {
            let left = eval_ra(a, s)?;
            let right = eval_ra(b, s)?;
            let right = right.project(&left.columns);
            let mut out = left;
            out.rows.extend(right.rows);
            Ok(out)
        }
        RAExpr::Diff(a, b) => {
            let left = eval_ra(a, s)?;
            let right = eval_ra(b, s)?.project(&left.columns);
            let rows = left.rows.difference(&right.rows).cloned();
            Ok(Relation::with_rows(left.columns.clone(), rows))
        }
        RAExpr::Join(a, b) => Ok(natural_join(&eval_ra(a, s)?, &eval_ra(b, s)?)),
        RAExpr::AntiJoin(a, b) => Ok(anti_join(&eval_ra(a, s)?, &eval_ra(b, s)?)),
        RAExpr::Count {
            input,
            group,
            result,
        } => {
            let r = eval_ra(input, s)?;
            let idx: Vec<usize> = group
                .iter()
                .map(|c| r.col_index(c).ok_or(EvalError::NotRanf))
                .collect::<Result<_, _>>()?;
            let mut counts: BTreeMap<Tuple, i64> = BTreeMap::new();
            for row in &r.rows {
                let key: Tuple = idx.iter().map(|&i| row[i].clone()).collect();
                let slot = counts.entry(key).or_insert(0);
                *slot = slot.checked_add(1).ok_or(EvalError::CountOverflow)?;
            }
            if group.is_empty() && counts.is_empty() {
                counts.insert(vec![], 0);
            }
            let mut cols = group.clone();
            cols.push(result.clone());
            let rows = counts.into_iter().map(|(mut k, n)| {
                k.push(Atom::Int(n));
                k
            });
            Ok(Relation::with_rows(cols, rows))
        }
    }
}

/// Compares the RA lowering against the direct RANF evaluation; closed
/// queries compare by emptiness of the auxiliary row.
pub fn lowering_agrees(q: &Query, s: &Structure) -> Result<bool, EvalError> {
    let direct = crate::eval::eval_ranf(q, s)?;
    let ra = eval_ra(&ranf2ra(q)?, s)?;
    if q.fv().is_empty() {
        Ok(direct.is_empty() == ra.is_empty())
    } else {
        Ok(direct.rows == ra.project(&q.fvseq()).rows)
    }
}

//! Van Gelder–Topor style classification: the `gen`/`con` relations over
//! plain atomic predicates, and the evaluable/allowed query classes.

use crate::syntax::{and, not, or, Query, Var};
use std::collections::BTreeSet;
use std::collections::HashMap;

pub type AtomSet = BTreeSet<Query>;

#[derive(Default)]
pub struct VgtCtx {
    gen_memo: HashMap<(Var, Query), Vec<AtomSet>>,
    con_memo: HashMap<(Var, Query), Vec<AtomSet>>,
}

impl VgtCtx {
    pub fn new() -> Self {
        Self::default()
    }

    /// All atomic-predicate sets derivable for the VGT generated relation.
    pub fn gen(&mut self, x: &str, q: &Query) -> Vec<AtomSet> {
        let key = (x.to_string(), q.clone());
        if let Some(hit) = self.gen_memo.get(&key) {
            return hit.clone();
        }
        self.gen_memo.insert(key.clone(), Vec::new());
        let out = self.gen_raw(x, q);
        self.gen_memo.insert(key, out.clone());
        out
    }

    fn gen_raw(&mut self, x: &str, q: &Query) -> Vec<AtomSet> {
        let mut out: BTreeSet<AtomSet> = BTreeSet::new();
        match q {
            _ if q.is_atomic_predicate() && q.fv().contains(x) => {
                out.insert([q.clone()].into());
            }
            Query::Not(inner) => match inner.as_ref() {
                Query::Not(p) => out.extend(self.gen(x, p)),
                Query::Or(a, b) => {
                    out.extend(self.gen(x, &and(not((**a).clone()), not((**b).clone()))));
                }
                Query::And(a, b) => {
                    out.extend(self.gen(x, &or(not((**a).clone()), not((**b).clone()))));
                }
                Query::Exists(y, body) if y != x => {
                    out.extend(self.gen(x, &not((**body).clone())));
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
            }
            Query::Exists(y, body) if y != x => {
                out.extend(self.gen(x, body));
            }
            _ => {}
        }
        out.into_iter()
            .take(crate::ranges::MAX_COVER_SETS)
            .collect()
    }

    /// All atomic-predicate sets derivable for the VGT constrained relation.
    pub fn con(&mut self, x: &str, q: &Query) -> Vec<AtomSet> {
        let key = (x.to_string(), q.clone());
        if let Some(hit) = self.con_memo.get(&key) {
            return hit.clone();
        }
        self.con_memo.insert(key.clone(), Vec::new());
        let out = self.con_raw(x, q);
        self.con_memo.insert(key, out.clone());
        out
    }

    fn con_raw(&mut self, x: &str, q: &Query) -> Vec<AtomSet> {
        let mut out: BTreeSet<AtomSet> = BTreeSet::new();
        if !q.fv().contains(x) {
            out.insert(AtomSet::new());
            return out.into_iter().collect();
        }
        match q {
            _ if q.is_atomic_predicate() => {
                out.insert([q.clone()].into());
            }
            Query::Not(inner) => match inner.as_ref() {
                Query::Not(p) => out.extend(self.con(x, p)),
                Query::Or(a, b) => {
                    out.extend(self.con(x, &and(not((**a).clone()), not((**b).clone()))));
                }
                Query::And(a, b) => {
                    out.extend(self.con(x, &or(not((**a).clone()), not((**b).clone()))));
                }
                Query::Exists(y, body) if y != x => {
                    out.extend(self.con(x, &not((**body).clone())));
                }
                _ => {}
            },
            Query::Or(a, b) => {
                let left = self.con(x, a);
                let right = self.con(x, b);
                for g1 in &left {
                    for g2 in &right {
                        out.insert(g1.union(g2).cloned().collect());
                    }
                }
            }
            Query::And(a, b) => {
                out.extend(self.gen(x, a));
                out.extend(self.gen(x, b));
                let left = self.con(x, a);
                let right = self.con(x, b);
                for g1 in &left {
                    for g2 in &right {
                        out.insert(g1.union(g2).cloned().collect());
                    }
                }
            }
            Query::Exists(y, body) if y != x => {
                out.extend(self.con(x, body));
            }
            _ => {}
        }
        out.into_iter()
            .take(crate::ranges::MAX_COVER_SETS)
            .collect()
    }
}

/// Evaluable: every free variable has a derivable generated set and every
/// bound variable a derivable constrained set.
pub fn is_evaluable(q: &Query) -> bool {
    let mut ctx = VgtCtx::new();
    q.fv().iter().all(|x| !ctx.gen(x, q).is_empty()) && check_bound(q, &mut ctx, false)
}

/// Allowed: like evaluable, but bound variables must have derivable
/// generated sets too.
pub fn is_allowed(q: &Query) -> bool {
    let mut ctx = VgtCtx::new();
    q.fv().iter().all(|x| !ctx.gen(x, q).is_empty()) && check_bound(q, &mut ctx, true)
}

fn check_bound(q: &Query, ctx: &mut VgtCtx, strict: bool) -> bool {
    match q {
        Query::Not(inner) => check_bound(inner, ctx, strict),
        Query::Or(a, b) | Query::And(a, b) => {
            check_bound(a, ctx, strict) && check_bound(b, ctx, strict)
        }
        Query::Exists(y, body) => {
            let ok = if strict {
                !ctx.gen(y, body).is_empty()
            } else {
                !ctx.con(y, body).is_empty()
            };
            ok && check_bound(body, ctx, strict)
        }
        Query::CntAgg { .. } | Query::MulEq { .. } => false,
        _ => true,
    }
}

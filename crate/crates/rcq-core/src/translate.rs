//! The core translation: an arbitrary query becomes a pair of safe-range
//! queries `(fin, inf)` where `inf` is closed and holds exactly when the
//! original query has infinitely many satisfying tuples, and `fin` agrees
//! with the original otherwise.
//!
//! `rb` restricts bound variables, `split` additionally restricts free
//! variables, and `rw` lowers both outputs to RANF. Nondeterministic
//! choices (which cover set, which variable) are resolved by minimizing the
//! number of equality partners first and evaluation cost on a training
//! database second.

use crate::complexity::ScopeOrder;
use crate::eval::cost;
use crate::normalize::{sr2ranf_qry, srnf, NormalizeError};
use crate::ranges::{cov_eqs, cov_qps, cov_qps_query, nongens_ctx, CoverSet, RangeCtx};
use crate::structure::Structure;
use crate::subst::{cp_plus, subst_bot, subst_var};
use crate::syntax::{
    and, exists_seq, exists_smart, not, or_all, Query, Var,
};
use crate::vgt::VgtCtx;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Rc2Sql,
    Vgt,
}

#[derive(Clone, Debug)]
pub struct TransConfig {
    pub mode: Mode,
    /// Apply constant propagation (plus contradiction pruning) after every
    /// rewriting step. On by default; rule-level golden tests switch it off.
    pub cp_extra: bool,
    pub training: Structure,
}

impl Default for TransConfig {
    fn default() -> Self {
        TransConfig {
            mode: Mode::Rc2Sql,
            cp_extra: true,
            training: Structure::new(),
        }
    }
}

impl TransConfig {
    pub fn with_training(training: Structure) -> Self {
        TransConfig {
            training,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub enum TranslateError {
    CoverUnderivable { var: Var, query: String },
    NotEvaluable,
    Lowering(NormalizeError),
}

impl fmt::Display for TranslateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranslateError::CoverUnderivable { var, query } => {
                write!(f, "no cover set derivable for {var} in {query}")
            }
            TranslateError::NotEvaluable => {
                write!(f, "query is not evaluable; the comparison mode requires evaluable input")
            }
            TranslateError::Lowering(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TranslateError {}

impl From<NormalizeError> for TranslateError {
    fn from(e: NormalizeError) -> Self {
        TranslateError::Lowering(e)
    }
}

/// The `(fin, inf)` output pair. `fin` keeps the original free variables
/// (unless it is `⊥`) and `inf` is closed; both are safe range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationResult {
    pub fin: Query,
    pub inf: Query,
}

/// A set of equalities between free variables accumulated by `split`.
pub type EqRelation = BTreeSet<(Var, Var)>;

/// Equivalence classes of the symmetric-transitive closure of `pairs`.
pub fn eclass(pairs: &EqRelation) -> Vec<BTreeSet<Var>> {
    let mut classes: Vec<BTreeSet<Var>> = Vec::new();
    for (a, b) in pairs {
        let ia = classes.iter().position(|c| c.contains(a));
        let ib = classes.iter().position(|c| c.contains(b));
        match (ia, ib) {
            (Some(i), Some(j)) if i != j => {
                let merged = classes.remove(i.max(j));
                classes[i.min(j)].extend(merged);
            }
            (Some(i), None) => {
                classes[i].insert(b.clone());
            }
            (None, Some(j)) => {
                classes[j].insert(a.clone());
            }
            (None, None) => {
                classes.push([a.clone(), b.clone()].into());
            }
            _ => {}
        }
    }
    classes.sort();
    classes
}

/// Variables of equivalence classes disjoint from the query's free
/// variables; nonempty means the naive conjunction cannot be safe range.
pub fn hanging(qf: &Query, pairs: &EqRelation) -> BTreeSet<Var> {
    let fv = qf.fv();
    eclass(pairs)
        .into_iter()
        .filter(|class| class.is_disjoint(&fv))
        .flatten()
        .collect()
}

/// Conjoins the equalities of `pairs` to `qf` left-associatively, always
/// picking next an equality with a variable already in scope when one
/// exists. The result is safe range exactly when nothing hangs.
pub fn sconj(qf: &Query, pairs: &EqRelation) -> Query {
    let mut conj = qf.clone();
    let mut scope = qf.fv();
    let mut pending: Vec<(Var, Var)> = pairs.iter().cloned().collect();
    while !pending.is_empty() {
        let pick = pending
            .iter()
            .position(|(a, b)| scope.contains(a) || scope.contains(b))
            .unwrap_or(0);
        let (a, b) = pending.remove(pick);
        scope.insert(a.clone());
        scope.insert(b.clone());
        conj = and(conj, Query::Eq(a, crate::syntax::var(b)));
    }
    conj
}

struct Translator<'a> {
    cfg: &'a TransConfig,
    ranges: RangeCtx,
    vgt: VgtCtx,
}

impl<'a> Translator<'a> {
    fn new(cfg: &'a TransConfig) -> Self {
        Translator {
            cfg,
            ranges: RangeCtx::new(),
            vgt: VgtCtx::new(),
        }
    }

    fn simp(&self, q: Query) -> Query {
        if self.cfg.cp_extra {
            cp_plus(&q)
        } else {
            q
        }
    }

    fn generator_cost(&self, qps: &[Query]) -> u64 {
        qps.iter()
            .map(|g| cost(g, &self.cfg.training).unwrap_or(u64::MAX))
            .fold(0u64, |a, b| a.saturating_add(b))
    }

    /// Picks the cover set for `x` in `q`: fewest equality partners first,
    /// cheapest generators on the training database second.
    fn choose_cover(&mut self, x: &str, q: &Query) -> Option<CoverSet> {
        let sets = self.ranges.cov(x, q);
        sets.into_iter().min_by_key(|g| {
            let eqs = cov_eqs(x, g).len();
            let qps = cov_qps(g);
            (eqs, self.generator_cost(&qps), g.len(), g.clone())
        })
    }

    /// Comparison-mode generator: every atomic predicate of a derivable
    /// constrained set, with all free variables except `x` quantified away
    /// (outer scopes first).
    fn choose_vgt_generators(&mut self, x: &str, q: &Query) -> Option<Vec<Query>> {
        let order = ScopeOrder::of(q);
        let sets = self.vgt.con(x, q);
        let lift = |atoms: &crate::vgt::AtomSet| -> Vec<Query> {
            atoms
                .iter()
                .map(|ap| {
                    let mut vars: Vec<Var> =
                        ap.fv().into_iter().filter(|v| v != x).collect();
                    // binder sequence runs from outer scopes inwards
                    vars.sort_by(|a, b| {
                        if a == b {
                            std::cmp::Ordering::Equal
                        } else if order.le(b, a) && !order.le(a, b) {
                            std::cmp::Ordering::Less
                        } else if order.le(a, b) && !order.le(b, a) {
                            std::cmp::Ordering::Greater
                        } else {
                            a.cmp(b)
                        }
                    });
                    let mut out = ap.clone();
                    for v in vars.iter().rev() {
                        out = exists_smart(v, out);
                    }
                    out
                })
                .collect()
        };
        sets.into_iter()
            .map(|a| lift(&a))
            .min_by_key(|gens| (self.generator_cost(gens), gens.len(), gens.clone()))
    }

    fn rb_members(
        &mut self,
        x: &str,
        qfix: &Query,
    ) -> Result<Vec<Query>, TranslateError> {
        let mut members = Vec::new();
        match self.cfg.mode {
            Mode::Rc2Sql => {
                let g = self.choose_cover(x, qfix).ok_or_else(|| {
                    TranslateError::CoverUnderivable {
                        var: x.to_string(),
                        query: crate::printer::print_query(qfix),
                    }
                })?;
                members.push(self.simp(and(qfix.clone(), cov_qps_query(&g))));
                for y in cov_eqs(x, &g) {
                    members.push(self.simp(subst_var(qfix, x, &y)));
                }
            }
            Mode::Vgt => {
                let gens = self.choose_vgt_generators(x, qfix).ok_or_else(|| {
                    TranslateError::CoverUnderivable {
                        var: x.to_string(),
                        query: crate::printer::print_query(qfix),
                    }
                })?;
                members.push(self.simp(and(qfix.clone(), or_all(gens))));
            }
        }
        members.push(self.simp(subst_bot(qfix, x)));
        Ok(members)
    }

    fn rb_go(&mut self, q: &Query) -> Result<Query, TranslateError> {
        Ok(match q {
            Query::Not(inner) => not(self.rb_go(inner)?),
            Query::Or(a, b) => crate::syntax::or(self.rb_go(a)?, self.rb_go(b)?),
            Query::And(a, b) => and(self.rb_go(a)?, self.rb_go(b)?),
            Query::Exists(x, body) => {
                let inner = self.rb_go(body)?;
                let mut work: Vec<Query> = Vec::new();
                for d in inner.flat_or() {
                    if !work.contains(&d) {
                        work.push(d);
                    }
                }
                loop {
                    let next = work
                        .iter()
                        .position(|d| nongens_ctx(&mut self.ranges, d).contains(x));
                    let Some(i) = next else { break };
                    let qfix = work.remove(i);
                    for m in self.rb_members(x, &qfix)? {
                        if !work.contains(&m) {
                            work.push(m);
                        }
                    }
                }
                let rebuilt = or_all(
                    work.into_iter()
                        .map(|d| exists_smart(x, d))
                        .collect(),
                );
                self.simp(rebuilt)
            }
            Query::CntAgg {
                result,
                bound,
                body,
            } => Query::CntAgg {
                result: result.clone(),
                bound: bound.clone(),
                body: Box::new(self.rb_go(body)?),
            },
            _ => q.clone(),
        })
    }

    fn split_go(&mut self, q: &Query) -> Result<TranslationResult, TranslateError> {
        let rbq = self.rb_go(&srnf(q))?;
        let original_fv = q.fv();
        let mut fin_set: Vec<(Query, EqRelation)> = vec![(rbq, EqRelation::new())];
        let mut inf_set: Vec<Query> = Vec::new();

        loop {
            let next = fin_set
                .iter()
                .position(|(d, _)| !nongens_ctx(&mut self.ranges, d).is_empty());
            let Some(i) = next else { break };
            let (qfix, e) = fin_set.remove(i);
            let ng = nongens_ctx(&mut self.ranges, &qfix);

            match self.cfg.mode {
                Mode::Rc2Sql => {
                    // choose (x, G) jointly: fewest equality partners, then
                    // generator cost, then canonical order
                    let mut best: Option<(usize, u64, Var, usize, CoverSet)> = None;
                    for x in &ng {
                        if let Some(g) = self.choose_cover(x, &qfix) {
                            let key = (
                                cov_eqs(x, &g).len(),
                                self.generator_cost(&cov_qps(&g)),
                                x.clone(),
                                g.len(),
                                g.clone(),
                            );
                            let better = match &best {
                                None => true,
                                Some((be, bc, bx, bn, bg)) => {
                                    (key.0, key.1, &key.2, key.3, &key.4)
                                        < (*be, *bc, bx, *bn, bg)
                                }
                            };
                            if better {
                                best = Some(key);
                            }
                        }
                    }
                    let (_, _, x, _, g) = best.ok_or_else(|| {
                        TranslateError::CoverUnderivable {
                            var: ng.iter().next().cloned().unwrap_or_default(),
                            query: crate::printer::print_query(&qfix),
                        }
                    })?;
                    let restricted =
                        self.simp(and(qfix.clone(), cov_qps_query(&g)));
                    if !fin_set.iter().any(|(d, ee)| *d == restricted && *ee == e) {
                        fin_set.push((restricted, e.clone()));
                    }
                    for y in cov_eqs(&x, &g) {
                        let renamed = self.simp(subst_var(&qfix, &x, &y));
                        let mut e2 = e.clone();
                        e2.insert((x.clone(), y.clone()));
                        if !fin_set.iter().any(|(d, ee)| *d == renamed && *ee == e2) {
                            fin_set.push((renamed, e2));
                        }
                    }
                    let dropped = self.simp(subst_bot(&qfix, &x));
                    if !inf_set.contains(&dropped) {
                        inf_set.push(dropped);
                    }
                }
                Mode::Vgt => {
                    let x = ng.iter().next().cloned().unwrap();
                    let gens =
                        self.choose_vgt_generators(&x, &qfix).ok_or_else(|| {
                            TranslateError::CoverUnderivable {
                                var: x.clone(),
                                query: crate::printer::print_query(&qfix),
                            }
                        })?;
                    let restricted = self.simp(and(qfix.clone(), or_all(gens)));
                    if !fin_set.iter().any(|(d, ee)| *d == restricted && *ee == e) {
                        fin_set.push((restricted, e.clone()));
                    }
                    let dropped = self.simp(subst_bot(&qfix, &x));
                    if !inf_set.contains(&dropped) {
                        inf_set.push(dropped);
                    }
                }
            }
        }

        // move pairs that cannot be assembled into a safe-range disjunct
        let mut kept: Vec<(Query, EqRelation)> = Vec::new();
        for (qf, e) in fin_set {
            let fv_all: BTreeSet<Var> = qf
                .fv()
                .into_iter()
                .chain(e.iter().flat_map(|(a, b)| [a.clone(), b.clone()]))
                .collect();
            if !hanging(&qf, &e).is_empty() || fv_all != original_fv {
                let moved = sconj(&qf, &e);
                if !inf_set.contains(&moved) {
                    inf_set.push(moved);
                }
            } else {
                kept.push((qf, e));
            }
        }

        let fin = self.simp(or_all(
            kept.iter().map(|(qf, e)| sconj(qf, e)).collect(),
        ));
        let closed = or_all(
            inf_set
                .iter()
                .map(|qi| exists_seq(&qi.fvseq(), qi.clone()))
                .collect(),
        );
        let inf = self.rb_go(&srnf(&self.simp(closed)))?;
        Ok(TranslationResult { fin, inf })
    }
}

/// Restricts bound variables: the result is inf-equivalent to `q` and every
/// binder's variable is range restricted in its scope.
pub fn rb(q: &Query, cfg: &TransConfig) -> Result<Query, TranslateError> {
    Translator::new(cfg).rb_go(&srnf(q))
}

/// Restricts free variables, producing the `(fin, inf)` pair.
pub fn split(q: &Query, cfg: &TransConfig) -> Result<TranslationResult, TranslateError> {
    Translator::new(cfg).split_go(q)
}

/// Full translation to RANF: `split` followed by the SRNF/RANF lowering of
/// both components.
pub fn rw(q: &Query, cfg: &TransConfig) -> Result<(Query, Query), TranslateError> {
    let pair = split(q, cfg)?;
    let fin = sr2ranf_qry(&pair.fin, &cfg.training)?;
    let inf = sr2ranf_qry(&pair.inf, &cfg.training)?;
    Ok((fin, inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query_infer;
    use crate::printer::print_query;
    use crate::ranges::is_safe_range;
    use crate::syntax::*;

    fn parse(text: &str) -> Query {
        parse_query_infer(text).unwrap().0
    }

    fn cfg() -> TransConfig {
        TransConfig::default()
    }

    #[test]
    fn eclass_and_hanging_examples() {
        let pairs: EqRelation = [
            ("x".to_string(), "y".to_string()),
            ("y".to_string(), "z".to_string()),
            ("u".to_string(), "v".to_string()),
        ]
        .into();
        let classes = eclass(&pairs);
        assert_eq!(classes.len(), 2);
        assert!(classes.contains(&["x", "y", "z"].map(String::from).into()));
        assert!(classes.contains(&["u", "v"].map(String::from).into()));

        let qf = parse("B(x)");
        let two: EqRelation = [
            ("x".to_string(), "y".to_string()),
            ("u".to_string(), "v".to_string()),
        ]
        .into();
        assert_eq!(
            hanging(&qf, &two),
            ["u", "v"].map(String::from).into()
        );
        assert!(hanging(&qf, &EqRelation::new()).is_empty());
    }

    #[test]
    fn sconj_orders_equalities() {
        let qf = parse("B(x)");
        let pairs: EqRelation = [
            ("x".to_string(), "y".to_string()),
            ("y".to_string(), "z".to_string()),
        ]
        .into();
        let out = sconj(&qf, &pairs);
        assert_eq!(print_query(&out), "((B(x) AND x = y) AND y = z)");
        assert!(is_safe_range(&out));
        assert_eq!(sconj(&qf, &EqRelation::new()), qf);
        let hang: EqRelation = [("u".to_string(), "v".to_string())].into();
        assert!(!is_safe_range(&sconj(&qf, &hang)));
    }

    #[test]
    fn rb_leaves_quantifier_free_queries_alone() {
        let q = parse("B(x)");
        assert_eq!(rb(&q, &cfg()).unwrap(), q);
    }

    #[test]
    fn rb_restricts_suspicious_user_query() {
        let q = parse("B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)");
        let out = rb(&q, &cfg()).unwrap();
        let expect = "(B(b) AND ((EXISTS s. ((NOT (EXISTS p. (P(b, p) AND (NOT S(p, u, s))))) \
                      AND (EXISTS p. S(p, u, s)))) OR (NOT (EXISTS p. P(b, p)))))";
        assert_eq!(print_query(&out), expect);
    }

    #[test]
    fn rb_keeps_generated_bound_variable() {
        // y is range restricted through the equality, so no rewriting fires
        let q = parse("EXISTS y. B(x) AND y = x");
        let out = rb(&q, &cfg()).unwrap();
        assert_eq!(out, q);
    }

    #[test]
    fn split_disjunction_example() {
        let q = parse("B(x) OR P2(x, y)");
        let r = split(&q, &cfg()).unwrap();
        assert_eq!(
            print_query(&r.fin),
            "((B(x) OR P2(x, y)) AND P2(x, y))"
        );
        assert_eq!(print_query(&r.inf), "(EXISTS x. B(x))");
    }

    #[test]
    fn split_hanging_equality_example() {
        let q = parse("B(x) AND u = v");
        let r = split(&q, &cfg()).unwrap();
        assert_eq!(r.fin, Query::False);
        assert_eq!(print_query(&r.inf), "(EXISTS x. B(x))");
    }

    #[test]
    fn split_negated_atom_example() {
        let q = parse("NOT B(x)");
        let r = split(&q, &cfg()).unwrap();
        assert_eq!(r.fin, Query::False);
        assert_eq!(r.inf, Query::True);
    }

    #[test]
    fn split_suspicious_user_example() {
        let q = parse("B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)");
        let r = split(&q, &cfg()).unwrap();
        let rb_text = "(B(b) AND ((EXISTS s. ((NOT (EXISTS p. (P(b, p) AND (NOT S(p, u, s))))) \
                       AND (EXISTS p. S(p, u, s)))) OR (NOT (EXISTS p. P(b, p)))))";
        assert_eq!(
            print_query(&r.fin),
            format!("({rb_text} AND (EXISTS s, p. S(p, u, s)))")
        );
        assert_eq!(
            print_query(&r.inf),
            "(EXISTS b. (B(b) AND (NOT (EXISTS p. P(b, p)))))"
        );
    }

    #[test]
    fn split_outputs_are_safe_range_with_expected_fv() {
        let samples = [
            "B(x) OR P2(x, y)",
            "B(x) AND u = v",
            "NOT B(x)",
            "B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)",
            "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
        ];
        for text in samples {
            let q = parse(text);
            let r = split(&q, &cfg()).unwrap();
            assert!(is_safe_range(&r.fin), "fin not safe range for {text}");
            assert!(is_safe_range(&r.inf), "inf not safe range for {text}");
            assert!(r.inf.fv().is_empty(), "inf not closed for {text}");
            if r.fin != Query::False {
                assert_eq!(r.fin.fv(), q.fv(), "fv mismatch for {text}");
            }
        }
    }

    #[test]
    fn rw_produces_ranf_pair() {
        use crate::ranges::is_ranf;
        let q = parse("NOT B(x)");
        let (fin, inf) = rw(&q, &cfg()).unwrap();
        assert_eq!(fin, Query::False);
        assert_eq!(inf, Query::True);
        let q = parse("B(x)");
        let (fin, inf) = rw(&q, &cfg()).unwrap();
        assert_eq!(fin, parse("B(x)"));
        assert_eq!(inf, Query::False);
        let q = parse("B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)");
        let (fin, inf) = rw(&q, &cfg()).unwrap();
        assert!(is_ranf(&fin));
        assert!(is_ranf(&inf));
    }
}

//! Hard-instance generation: given a query, builds a structure on which a
//! chosen positive tuple set satisfies the query, a negative set falsifies
//! it, and every subquery keeps a nontrivial result. Also houses the
//! pseudorandom query generator used by the benchmark harness.

use crate::atom::Atom;
use crate::structure::{Structure, Tuple};
use crate::syntax::{and, and_all, exists, not, or, pred, var, Query, Term, Var};
use crate::vgt::VgtCtx;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct DataGolfError(pub Vec<String>);

impl fmt::Display for DataGolfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "query violates generator assumptions: {}", self.0.join("; "))
    }
}

impl std::error::Error for DataGolfError {}

/// Pos/neg tuple sets over a fixed variable order plus the strategy flag.
#[derive(Clone, Debug)]
pub struct DataGolfParams {
    pub varlist: Vec<Var>,
    pub pos: Vec<Tuple>,
    pub neg: Vec<Tuple>,
    pub strategy: u8,
}

/// Checks the four structural assumptions the generator needs: guarded
/// quantifiers, no constant equalities, no closed subqueries, no repeated
/// predicate symbols or equality variables.
pub fn check_dg_assumptions(q: &Query) -> AssumptionReport {
    let mut violations = Vec::new();
    let mut vgt = VgtCtx::new();
    let mut pred_names: Vec<String> = Vec::new();
    let mut eq_vars: Vec<BTreeSet<Var>> = Vec::new();
    for sub in q.subqueries() {
        match &sub {
            Query::Exists(y, body) => {
                let sets = vgt.con(y, body);
                let guarded = sets.iter().any(|a| {
                    a.iter().all(|ap| {
                        let fv = ap.fv();
                        fv.contains(y) && fv.len() > 1
                    })
                });
                if !guarded {
                    violations.push(format!(
                        "unguarded quantifier for {y} in {}",
                        crate::printer::print_query(&sub)
                    ));
                }
            }
            Query::Eq(_, Term::Const(_)) => {
                violations.push(format!(
                    "constant equality {}",
                    crate::printer::print_query(&sub)
                ));
            }
            _ => {}
        }
        if sub.fv().is_empty() {
            violations.push(format!(
                "closed subquery {}",
                crate::printer::print_query(&sub)
            ));
        }
    }
    collect_occurrences(q, &mut pred_names, &mut eq_vars);
    let mut seen = BTreeSet::new();
    for name in &pred_names {
        if !seen.insert(name.clone()) {
            violations.push(format!("repeated predicate symbol {name}"));
        }
    }
    for i in 0..eq_vars.len() {
        for j in i + 1..eq_vars.len() {
            if !eq_vars[i].is_disjoint(&eq_vars[j]) {
                violations.push("equalities share a variable".into());
            }
        }
    }
    AssumptionReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn collect_occurrences(q: &Query, preds: &mut Vec<String>, eqs: &mut Vec<BTreeSet<Var>>) {
    match q {
        Query::Pred(name, _) => preds.push(name.clone()),
        Query::Eq(x, Term::Var(y)) => {
            eqs.push([x.clone(), y.clone()].into());
        }
        Query::Not(inner) | Query::Exists(_, inner) => collect_occurrences(inner, preds, eqs),
        Query::Or(a, b) | Query::And(a, b) => {
            collect_occurrences(a, preds, eqs);
            collect_occurrences(b, preds, eqs);
        }
        Query::CntAgg { body, .. } => collect_occurrences(body, preds, eqs),
        _ => {}
    }
}

/// Variable groups whose values coincide inside positive (negative) tuples.
pub fn dgeqs(q: &Query, gamma: u8) -> (BTreeSet<Var>, BTreeSet<Var>) {
    match q {
        Query::Pred(..) => (BTreeSet::new(), BTreeSet::new()),
        Query::Eq(x, Term::Var(y)) => ([x.clone(), y.clone()].into(), BTreeSet::new()),
        Query::Eq(..) => (BTreeSet::new(), BTreeSet::new()),
        Query::Not(inner) => {
            let (p, n) = dgeqs(inner, gamma);
            (n, p)
        }
        Query::Or(a, b) | Query::And(a, b) => {
            let (p1, n1) = dgeqs(a, gamma);
            let (p2, n2) = dgeqs(b, gamma);
            if gamma == 0 {
                (&p1 | &p2, &n1 | &n2)
            } else if matches!(q, Query::Or(..)) {
                (&p1 | &n2, &n1 | &n2)
            } else {
                (&p1 | &p2, &p1 | &n2)
            }
        }
        Query::Exists(_, body) => dgeqs(body, gamma),
        _ => (BTreeSet::new(), BTreeSet::new()),
    }
}

/// Mints globally unique even integers, column by column.
pub struct AtomMinter {
    next: i64,
}

impl AtomMinter {
    pub fn new(seed: u64) -> Self {
        AtomMinter {
            next: 2 * (seed as i64) * 1_000_003,
        }
    }

    fn fresh(&mut self) -> Atom {
        let a = Atom::Int(self.next);
        self.next += 2;
        a
    }

    /// `count` tuples over `varlist`; variables in `group` share one value
    /// per tuple, all other values are pairwise distinct everywhere.
    pub fn tuple_set(
        &mut self,
        varlist: &[Var],
        count: usize,
        group: &BTreeSet<Var>,
    ) -> Vec<Tuple> {
        let mut columns: Vec<Vec<Atom>> = Vec::with_capacity(varlist.len());
        let mut group_column: Option<Vec<Atom>> = None;
        for v in varlist {
            if group.contains(v) {
                if let Some(shared) = &group_column {
                    columns.push(shared.clone());
                    continue;
                }
                let fresh: Vec<Atom> = (0..count).map(|_| self.fresh()).collect();
                group_column = Some(fresh.clone());
                columns.push(fresh);
            } else {
                columns.push((0..count).map(|_| self.fresh()).collect());
            }
        }
        (0..count)
            .map(|i| columns.iter().map(|c| c[i].clone()).collect())
            .collect()
    }
}

fn embed(tuples: &[Tuple], varlist: &[Var], args: &[Term]) -> Vec<Tuple> {
    tuples
        .iter()
        .map(|t| {
            args.iter()
                .map(|a| match a {
                    Term::Var(v) => {
                        let i = varlist
                            .iter()
                            .position(|w| w == v)
                            .expect("variable missing from varlist");
                        t[i].clone()
                    }
                    Term::Const(c) => c.clone(),
                })
                .collect()
        })
        .collect()
}

/// Computes the Data Golf structure for `q` and the given tuple sets.
pub fn dg(q: &Query, params: &DataGolfParams) -> Result<Structure, DataGolfError> {
    let report = check_dg_assumptions(q);
    if !report.ok {
        return Err(DataGolfError(report.violations));
    }
    let mut minter = AtomMinter::new(0);
    // continue minting above everything already present in the inputs
    let ceiling = params
        .pos
        .iter()
        .chain(params.neg.iter())
        .flatten()
        .filter_map(|a| match a {
            Atom::Int(v) => Some(*v),
            Atom::Text(_) => None,
        })
        .max();
    if let Some(m) = ceiling {
        minter.next = m + 2 - (m % 2).abs();
    }
    Ok(dg_go(
        q,
        &params.varlist,
        &params.pos,
        &params.neg,
        params.strategy,
        &mut minter,
    ))
}

fn dg_go(
    q: &Query,
    varlist: &[Var],
    pos: &[Tuple],
    neg: &[Tuple],
    gamma: u8,
    minter: &mut AtomMinter,
) -> Structure {
    match q {
        Query::Pred(name, args) => {
            Structure::new().with_relation(name, embed(pos, varlist, args))
        }
        Query::Eq(..) => Structure::new(),
        Query::Not(inner) => dg_go(inner, varlist, neg, pos, gamma, minter),
        Query::Or(a, b) | Query::And(a, b) => {
            let (p1, n1) = dgeqs(a, gamma);
            let (p2, n2) = dgeqs(b, gamma);
            let is_and = matches!(q, Query::And(..));
            let (g1, g2) = if gamma == 0 {
                (&p1 | &n2, &n1 | &p2)
            } else if is_and {
                (&n1 | &n2, &n1 | &p2)
            } else {
                (&p1 | &p2, &n1 | &p2)
            };
            let m = pos.len().min(neg.len());
            let t1 = minter.tuple_set(varlist, m, &g1);
            let t2 = minter.tuple_set(varlist, m, &g2);
            let concat = |a: &[Tuple], b: &[Tuple]| -> Vec<Tuple> {
                a.iter().chain(b.iter()).cloned().collect()
            };
            if gamma == 0 {
                dg_go(a, varlist, &concat(pos, &t1), &concat(neg, &t2), gamma, minter).union(
                    dg_go(b, varlist, &concat(pos, &t2), &concat(neg, &t1), gamma, minter),
                )
            } else if is_and {
                dg_go(a, varlist, &concat(pos, neg), &concat(&t1, &t2), gamma, minter).union(
                    dg_go(b, varlist, &concat(pos, &t2), &concat(neg, &t1), gamma, minter),
                )
            } else {
                dg_go(a, varlist, &concat(pos, &t1), &concat(neg, &t2), gamma, minter).union(
                    dg_go(b, varlist, &concat(&t1, &t2), &concat(neg, pos), gamma, minter),
                )
            }
        }
        Query::Exists(_, body) => dg_go(body, varlist, pos, neg, gamma, minter),
        _ => Structure::new(),
    }
}

/// End-to-end convenience: mints the pos/neg sets for `q` (respecting its
/// equality groups) and computes the structure. Deterministic in the seed.
pub fn dg_generate(
    q: &Query,
    n: usize,
    gamma: u8,
    seed: u64,
) -> Result<(Structure, DataGolfParams), DataGolfError> {
    let report = check_dg_assumptions(q);
    if !report.ok {
        return Err(DataGolfError(report.violations));
    }
    let varlist: Vec<Var> = q.av().into_iter().collect();
    let mut minter = AtomMinter::new(seed);
    let (vp, vn) = dgeqs(q, gamma);
    let pos = minter.tuple_set(&varlist, n, &vp);
    let neg = minter.tuple_set(&varlist, n, &vn);
    let params = DataGolfParams {
        varlist: varlist.clone(),
        pos: pos.clone(),
        neg: neg.clone(),
        strategy: gamma,
    };
    let s = dg_go(q, &varlist, &pos, &neg, gamma, &mut minter);
    Ok((s, params))
}

/// The training database preset: a hard instance of constant size two.
pub fn training_db(q: &Query) -> Structure {
    if let Ok((s, _)) = dg_generate(q, 2, 1, 0) {
        return s;
    }
    // fallback for queries outside the generator assumptions: two rows of
    // globally distinct values per predicate
    let mut minter = AtomMinter::new(0);
    let mut s = Structure::new();
    for sub in q.subqueries() {
        if let Query::Pred(name, args) = &sub {
            if s.relation(name).is_some() {
                continue;
            }
            let rows: Vec<Tuple> = (0..2)
                .map(|_| (0..args.len()).map(|_| minter.fresh()).collect())
                .collect();
            s = s.with_relation(name, rows);
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryProfile {
    Evaluable,
    Infinite,
}

impl QueryProfile {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "evaluable" => Some(QueryProfile::Evaluable),
            "infinite" => Some(QueryProfile::Infinite),
            _ => None,
        }
    }
}

/// Generator size: atoms, equalities, negations and binary connectives each
/// weigh one; a run of quantifiers weighs one.
pub fn gen_size(q: &Query) -> usize {
    match q {
        Query::Not(inner) => 1 + gen_size(inner),
        Query::Or(a, b) | Query::And(a, b) => 1 + gen_size(a) + gen_size(b),
        Query::Exists(_, body) => {
            let mut inner = body.as_ref();
            while let Query::Exists(_, next) = inner {
                inner = next;
            }
            1 + gen_size(inner)
        }
        Query::CntAgg { body, .. } => 1 + gen_size(body),
        _ => 1,
    }
}

struct QueryGen {
    rng: ChaCha8Rng,
    next_var: usize,
    next_pred: usize,
    used_eq_vars: BTreeSet<Var>,
}

const PRED_BASES: &[&str] = &["P", "Q", "R", "S", "T", "U", "V", "W"];

impl QueryGen {
    fn fresh_pred(&mut self, arity: usize) -> String {
        let base = PRED_BASES[self.next_pred % PRED_BASES.len()];
        let round = self.next_pred / PRED_BASES.len();
        self.next_pred += 1;
        if round == 0 {
            format!("{base}{arity}")
        } else {
            format!("{base}{arity}_{round}")
        }
    }

    fn fresh_vars(&mut self, count: usize) -> Vec<Var> {
        (0..count)
            .map(|_| {
                let v = format!("x{}", self.next_var);
                self.next_var += 1;
                v
            })
            .collect()
    }

    /// Positive atom over `must ∪ sample(scope)`, pairwise distinct args.
    fn atom(&mut self, scope: &[Var], must: &[Var]) -> Query {
        let mut args: Vec<Var> = must.to_vec();
        let mut extra: Vec<Var> = scope
            .iter()
            .filter(|v| !args.contains(v))
            .cloned()
            .collect();
        let max_extra = 4usize.saturating_sub(args.len()).min(extra.len());
        let min_extra = usize::from(args.is_empty()).min(max_extra);
        let take = if max_extra == 0 {
            0
        } else {
            self.rng.gen_range(min_extra..=max_extra)
        };
        for _ in 0..take {
            let i = self.rng.gen_range(0..extra.len());
            args.push(extra.remove(i));
        }
        debug_assert!(!args.is_empty(), "atoms need at least one variable");
        for i in (1..args.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            args.swap(i, j);
        }
        let name = self.fresh_pred(args.len());
        pred(name, args.into_iter().map(var).collect())
    }

    fn equality(&mut self, scope: &[Var]) -> Option<Query> {
        let candidates: Vec<Var> = scope
            .iter()
            .filter(|v| !self.used_eq_vars.contains(*v))
            .cloned()
            .collect();
        if candidates.len() < 2 {
            return None;
        }
        let i = self.rng.gen_range(0..candidates.len());
        let mut j = self.rng.gen_range(0..candidates.len());
        while j == i {
            j = self.rng.gen_range(0..candidates.len());
        }
        self.used_eq_vars.insert(candidates[i].clone());
        self.used_eq_vars.insert(candidates[j].clone());
        Some(Query::Eq(candidates[i].clone(), var(candidates[j].clone())))
    }

    /// A conjunction of exactly `budget` size units, anchored by a positive
    /// atom so every quantified variable stays guarded.
    fn conj(&mut self, budget: usize, scope: &[Var], anchor: &[Var]) -> Query {
        debug_assert!(budget >= 1 && budget != 2);
        let first = self.atom(scope, anchor);
        let mut remaining = budget - 1;
        let mut blocks = vec![first];
        while remaining > 0 {
            debug_assert!(remaining >= 2, "budget accounting leaves no dead units");
            // each extra block costs its own size plus one for the connective;
            // never leave exactly one unit behind
            let valid: Vec<usize> = (1..=(remaining - 1).min(7))
                .filter(|b| remaining - (b + 1) != 1)
                .collect();
            let b = valid[self.rng.gen_range(0..valid.len())];
            remaining -= b + 1;
            // a conjunction of k blocks costs the blocks plus k-1 connectives,
            // so an anchored conjunction of size 2 does not exist: digs of
            // size 3 and negated digs of size 4 are unbuildable
            let block = match b {
                1 => {
                    if self.rng.gen_bool(0.3) {
                        self.equality(scope)
                            .unwrap_or_else(|| self.atom(scope, &[]))
                    } else {
                        self.atom(scope, &[])
                    }
                }
                2 => {
                    if self.rng.gen_bool(0.6) {
                        self.dig(2, scope)
                    } else {
                        not(self.atom(scope, &[]))
                    }
                }
                3 => self.neg_dig(3, scope),
                4 => self.dig(4, scope),
                _ => {
                    if self.rng.gen_bool(0.6) {
                        self.neg_dig(b, scope)
                    } else {
                        self.dig(b, scope)
                    }
                }
            };
            blocks.push(block);
        }
        and_all(blocks)
    }

    /// `∃v⃗. atom-with-v⃗-and-an-outer-var ∧ ...` of exactly `budget` units
    /// including the quantifier run.
    fn dig(&mut self, budget: usize, scope: &[Var]) -> Query {
        debug_assert!(budget >= 2);
        let vars = self.fresh_vars(if budget >= 4 && scope.len() <= 3 { 2 } else { 1 });
        let mut inner_scope: Vec<Var> = scope.to_vec();
        inner_scope.extend(vars.iter().cloned());
        // anchor ties every bound variable to an outer one
        let mut anchor = vars.clone();
        anchor.push(scope[self.rng.gen_range(0..scope.len())].clone());
        let body = self.conj(budget - 1, &inner_scope, &anchor);
        let mut out = body;
        for v in vars.iter().rev() {
            out = exists(v.clone(), out);
        }
        out
    }

    fn neg_dig(&mut self, budget: usize, scope: &[Var]) -> Query {
        debug_assert!(budget >= 3);
        not(self.dig(budget - 1, scope))
    }
}

/// Deterministic pseudorandom query generation. Evaluable queries follow the
/// guarded conjunction/negation shape with disjunction only at the top
/// level; infinite-profile queries take the form
/// `Q1 ∧ ¬∃x,y. (Q2 ∧ ¬Q3)` with a free variable hidden inside the double
/// negation. All outputs satisfy the generator assumptions.
pub fn gen_random_query(seed: u64, size: usize, profile: QueryProfile) -> Query {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..400 {
        let attempt_seed = rng.gen::<u64>();
        let candidate = match profile {
            QueryProfile::Evaluable => gen_evaluable(attempt_seed, size),
            QueryProfile::Infinite => gen_infinite(attempt_seed, size),
        };
        if let Some(q) = candidate {
            let report = check_dg_assumptions(&q);
            let profile_ok = match profile {
                QueryProfile::Evaluable => crate::vgt::is_evaluable(&q),
                QueryProfile::Infinite => !crate::vgt::is_evaluable(&q),
            };
            if report.ok && profile_ok && q.fvseq() == vec!["x0", "x1"] {
                return q;
            }
        }
    }
    panic!("query generation failed to satisfy the assumptions; seed {seed}, size {size}");
}

/// Exposed for diagnostics in tests.
pub fn debug_gen_evaluable(seed: u64, size: usize) -> Option<Query> {
    gen_evaluable(seed, size)
}

fn gen_evaluable(seed: u64, size: usize) -> Option<Query> {
    if size < 3 {
        return None;
    }
    let mut g = QueryGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_var: 2,
        next_pred: 0,
        used_eq_vars: BTreeSet::new(),
    };
    let scope = vec!["x0".to_string(), "x1".to_string()];
    let top_or = size >= 9 && g.rng.gen_bool(0.25);
    let q = if top_or {
        let left_budget = g.rng.gen_range(3..=(size - 1 - 3));
        let left = g.conj(left_budget, &scope, &["x0".to_string(), "x1".to_string()]);
        let right = g.conj(
            size - 1 - left_budget,
            &scope,
            &["x0".to_string(), "x1".to_string()],
        );
        or(left, right)
    } else {
        g.conj(size, &scope, &["x0".to_string(), "x1".to_string()])
    };
    (gen_size(&q) == size).then_some(q)
}

fn gen_infinite(seed: u64, size: usize) -> Option<Query> {
    let mut g = QueryGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_var: 2,
        next_pred: 0,
        used_eq_vars: BTreeSet::new(),
    };
    // anchor one free variable; the other only occurs under the negation
    let anchored = if g.rng.gen_bool(0.5) { "x0" } else { "x1" };
    let hidden = if anchored == "x0" { "x1" } else { "x0" };
    let guard = g.atom(&[anchored.to_string()], &[anchored.to_string()]);
    let inner_vars = g.fresh_vars(2);
    let mut atom_vars = vec![anchored.to_string()];
    atom_vars.extend(inner_vars.iter().cloned());
    let inner_atom = g.atom(&atom_vars, &atom_vars.clone());
    let psi = if g.rng.gen_bool(0.4) {
        let partner = inner_vars[g.rng.gen_range(0..inner_vars.len())].clone();
        Query::Eq(hidden.to_string(), var(partner))
    } else {
        let mut vars = vec![hidden.to_string()];
        if g.rng.gen_bool(0.7) {
            vars.push(inner_vars[g.rng.gen_range(0..inner_vars.len())].clone());
        }
        g.atom(&vars, &vars.clone())
    };
    let mut body = and(inner_atom, not(psi));
    // pad with extra guarded conjuncts to approach the requested size
    let base = 8;
    let mut extra = size.saturating_sub(base) / 2;
    while extra > 0 {
        body = and(body, g.atom(&atom_vars, &[inner_vars[0].clone()]));
        extra -= 1;
    }
    let mut block = body;
    for v in inner_vars.iter().rev() {
        block = exists(v.clone(), block);
    }
    Some(and(guard, not(block)))
}

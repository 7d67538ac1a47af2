//! Cross-module invariants: semantics preservation of every rewriting
//! stage against the brute-force evaluators, soundness of the derivation
//! relations, and the structural contracts of the translation.

use rcq_core::aggs::cnt;
use rcq_core::complexity::{closeatoms, closeatomseq};
use rcq_core::corpus::{fixture_queries, generated_corpus, q_susp, q_susp_user};
use rcq_core::datagolf::{dg_generate, training_db, QueryProfile};
use rcq_core::eval::{adom, cost, eval_fin_dom, eval_ranf};
use rcq_core::normalize::{is_binder_hygienic, is_srnf, sr2ranf_qry, srnf};
use rcq_core::oracle::{oracle_check_tuples, oracle_sat_counts_dom};
use rcq_core::parser::parse_query_infer;
use rcq_core::printer::print_query;
use rcq_core::ranges::{cov_eqs, cov_qps_query, is_ranf, is_safe_range, RangeCtx};
use rcq_core::structure::Structure;
use rcq_core::subst::{cp, has_distinct_vars, subst_bot, subst_var};
use rcq_core::syntax::Query;
use rcq_core::translate::{rb, rw, split, TransConfig};
use rcq_core::vgt::{is_allowed, is_evaluable};
use rcq_core::Atom;
use std::collections::BTreeSet;

fn parse(text: &str) -> Query {
    parse_query_infer(text).unwrap().0
}

fn small_structure() -> Structure {
    Structure::new()
        .with_relation("B", [vec![Atom::int(1)], vec![Atom::int(2)]])
        .with_relation(
            "P2",
            [
                vec![Atom::int(1), Atom::int(3)],
                vec![Atom::int(2), Atom::int(1)],
            ],
        )
        .with_relation(
            "P3",
            [vec![Atom::int(1), Atom::int(3), Atom::int(5)]],
        )
}

fn small_queries() -> Vec<Query> {
    [
        "B(x)",
        "B(x) AND P2(x, y)",
        "B(x) OR P2(x, y)",
        "NOT B(x)",
        "B(x) AND NOT P2(x, y)",
        "EXISTS y. P2(x, y)",
        "B(x) AND x = y",
        "EXISTS y. B(x) AND y = x",
        "FORALL y. P2(x, y) -> B(y)",
        "B(x) AND u = v",
        "EXISTS y. P2(x, y) AND NOT P3(x, y, z)",
    ]
    .iter()
    .map(|t| parse(t))
    .collect()
}

/// Extended domain for brute-force comparisons.
fn extended_dom(q: &Query, s: &Structure) -> BTreeSet<Atom> {
    let mut dom = adom(q, s);
    let max = dom
        .iter()
        .filter_map(|a| match a {
            Atom::Int(v) => Some(*v),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let extra = (q.av().len() + q.fv().len() + 1) as i64;
    for i in 1..=extra {
        dom.insert(Atom::Int(max + i));
    }
    dom
}

#[test]
fn cp_preserves_semantics_on_small_domains() {
    let s = small_structure();
    for q in small_queries() {
        let padded = rcq_core::syntax::and(q.clone(), Query::True);
        let dom = extended_dom(&q, &s);
        let a = eval_fin_dom(&q, &s, &dom).unwrap();
        let b = eval_fin_dom(&cp(&padded), &s, &dom).unwrap();
        assert_eq!(a.rows, b.rows, "cp changed semantics of {}", print_query(&q));
    }
}

#[test]
fn subst_var_respects_binding_structure() {
    for q in small_queries() {
        let out = subst_var(&q, "x", "w");
        let mut expected: BTreeSet<String> = q.fv();
        if expected.remove("x") {
            expected.insert("w".to_string());
        }
        assert_eq!(out.fv(), expected, "fv after substitution in {}", print_query(&q));
    }
}

#[test]
fn gen_witness_implies_bottom_substitution() {
    // whenever a generator set is derivable, dropping the variable kills the query
    let mut ctx = RangeCtx::new();
    for q in small_queries() {
        for x in q.fv() {
            if !ctx.gen(&x, &q).is_empty() {
                assert_eq!(
                    subst_bot(&q, &x),
                    Query::False,
                    "generated variable {x} should collapse {}",
                    print_query(&q)
                );
            }
        }
    }
}

#[test]
fn cov_soundness_on_small_domains() {
    // for structures and assignments avoiding the cover set, the query is
    // insensitive to the covered variable
    let s = small_structure();
    let mut ctx = RangeCtx::new();
    for q in small_queries() {
        if !rcq_core::ranges::has_rr_bound_vars(&mut ctx, &q) {
            continue;
        }
        let dom = extended_dom(&q, &s);
        for x in q.fv() {
            for g in ctx.cov(&x, &q) {
                let qps = cov_qps_query(&g);
                let eqs = cov_eqs(&x, &g);
                // enumerate assignments over fv(q)
                let fv = q.fvseq();
                let full = eval_fin_dom(&q, &s, &dom).unwrap();
                let dropped = subst_bot(&q, &x);
                let dropped_rel = eval_fin_dom(&dropped, &s, &dom).unwrap();
                let qps_rel = eval_fin_dom(&qps, &s, &dom).unwrap();
                let atoms: Vec<Atom> = dom.iter().cloned().collect();
                let mut assignment: Vec<usize> = vec![0; fv.len()];
                loop {
                    let tuple: Vec<Atom> =
                        assignment.iter().map(|&i| atoms[i].clone()).collect();
                    let xi = fv.iter().position(|v| v == &x).unwrap();
                    let violates_eq = eqs.iter().any(|y| {
                        fv.iter()
                            .position(|v| v == y)
                            .map(|yi| tuple[xi] == tuple[yi])
                            .unwrap_or(false)
                    });
                    let sat_qps = if qps == Query::False {
                        false
                    } else {
                        let proj: Vec<Atom> = qps_rel
                            .columns
                            .iter()
                            .map(|c| tuple[fv.iter().position(|v| v == c).unwrap()].clone())
                            .collect();
                        qps_rel.rows.contains(&proj)
                    };
                    if !sat_qps && !violates_eq {
                        let in_full = full.rows.contains(&tuple);
                        let dropped_proj: Vec<Atom> = dropped_rel
                            .columns
                            .iter()
                            .map(|c| tuple[fv.iter().position(|v| v == c).unwrap()].clone())
                            .collect();
                        let in_dropped = dropped_rel.rows.contains(&dropped_proj);
                        assert_eq!(
                            in_full,
                            in_dropped,
                            "cover set unsound for {x} in {}",
                            print_query(&q)
                        );
                    }
                    // next assignment
                    let mut k = 0;
                    loop {
                        if k == assignment.len() {
                            break;
                        }
                        assignment[k] += 1;
                        if assignment[k] < atoms.len() {
                            break;
                        }
                        assignment[k] = 0;
                        k += 1;
                    }
                    if k == assignment.len() {
                        break;
                    }
                }
            }
        }
    }
}

#[test]
fn srnf_is_equivalence_preserving_and_shaped() {
    let s = small_structure();
    for q in small_queries() {
        let out = srnf(&q);
        assert!(is_srnf(&out), "not SRNF: {}", print_query(&out));
        assert_eq!(out.fv(), q.fv());
        let dom = extended_dom(&q, &s);
        let a = eval_fin_dom(&q, &s, &dom).unwrap();
        let b = eval_fin_dom(&out, &s, &dom).unwrap();
        assert_eq!(a.rows, b.rows, "srnf changed semantics of {}", print_query(&q));
    }
}

#[test]
fn sr2ranf_is_equivalence_preserving() {
    let s = small_structure();
    let training = Structure::new();
    for q in small_queries() {
        if !is_safe_range(&q) {
            continue;
        }
        let out = sr2ranf_qry(&q, &training).unwrap();
        assert!(is_ranf(&out));
        assert!(is_binder_hygienic(&out), "captured binder in {}", print_query(&out));
        let dom = extended_dom(&q, &s);
        let a = eval_fin_dom(&q, &s, &dom).unwrap();
        let b = eval_fin_dom(&out, &s, &dom).unwrap();
        assert_eq!(a.rows, b.rows, "lowering changed semantics of {}", print_query(&q));
    }
}

#[test]
fn rb_outputs_restrict_bound_variables_and_stay_inf_equivalent() {
    let cfg = TransConfig::default();
    let s = small_structure();
    let mut ctx = RangeCtx::new();
    for q in small_queries() {
        let out = rb(&q, &cfg).unwrap();
        assert!(
            rcq_core::ranges::has_rr_bound_vars(&mut ctx, &out),
            "bound variable unrestricted in {}",
            print_query(&out)
        );
        // inf-equivalence over the extended finite domain
        let dom = extended_dom(&rcq_core::syntax::and(q.clone(), out.clone()), &s);
        let a = eval_fin_dom(&q, &s, &dom).unwrap();
        let b = eval_fin_dom(&out, &s, &dom).unwrap();
        assert_eq!(a.rows, b.rows, "rb changed semantics of {}", print_query(&q));
    }
}

#[test]
fn allowed_implies_safe_range_on_corpus() {
    let mut queries: Vec<Query> = fixture_queries().into_iter().map(|(_, q)| q).collect();
    queries.extend(generated_corpus(0..30, 12).into_iter().map(|(_, q)| q));
    queries.extend(small_queries());
    let mut allowed_seen = 0;
    for q in &queries {
        if is_allowed(q) {
            allowed_seen += 1;
            assert!(is_safe_range(q), "allowed but not safe range: {}", print_query(q));
        }
        if is_ranf(q) {
            assert!(is_safe_range(q), "ranf but not safe range: {}", print_query(q));
        }
    }
    assert!(allowed_seen > 0, "corpus should contain allowed queries");
}

#[test]
fn translation_contract_on_generated_corpus() {
    // (FV) plus safe-rangeness of both components
    let queries = generated_corpus(0..20, 12);
    for (name, q) in &queries {
        let cfg = TransConfig::with_training(training_db(q));
        let r = split(q, &cfg).unwrap();
        assert!(is_safe_range(&r.fin), "{name}: fin not safe range");
        assert!(is_safe_range(&r.inf), "{name}: inf not safe range");
        assert!(r.inf.fv().is_empty(), "{name}: inf not closed");
        if r.fin != Query::False {
            assert_eq!(r.fin.fv(), q.fv(), "{name}: fin free variables changed");
        }
        let (fin, inf) = rw(q, &cfg).unwrap();
        assert!(is_ranf(&fin), "{name}: lowered fin not RANF");
        assert!(is_ranf(&inf), "{name}: lowered inf not RANF");
    }
}

#[test]
fn quantified_predicate_containment_on_corpus() {
    // closeatoms of both translated components stays within the closure of
    // the source query's atoms
    let mut queries: Vec<(String, Query)> = generated_corpus(0..20, 12);
    queries.push(("susp".into(), q_susp()));
    queries.push(("susp_user".into(), q_susp_user()));
    for (name, q) in &queries {
        if !has_distinct_vars(q) {
            continue;
        }
        let cfg = TransConfig::with_training(training_db(q));
        let (fin, inf) = rw(q, &cfg).unwrap();
        let closure = closeatomseq(q);
        for member in closeatoms(&fin) {
            assert!(
                closure.contains(&member),
                "{name}: {} outside the source closure",
                print_query(&member)
            );
        }
        // the closed component quantifies the free variables, so its atoms
        // live in the closure of the existentially closed source
        let closed_src = rcq_core::syntax::exists_seq(&q.fvseq(), q.clone());
        let closed_closure = closeatomseq(&closed_src);
        for member in closeatoms(&inf) {
            assert!(
                closed_closure.contains(&member),
                "{name}: {} outside the closed-source closure",
                print_query(&member)
            );
        }
    }
}

#[test]
fn cost_dominates_result_size() {
    let s = small_structure();
    for q in small_queries() {
        if !is_ranf(&q) {
            continue;
        }
        let c = cost(&q, &s).unwrap();
        let r = eval_ranf(&q, &s).unwrap();
        assert!(c >= (r.len() * q.fv().len()) as u64);
    }
}

#[test]
fn count_optimization_is_equivalent_and_never_costlier() {
    let queries = generated_corpus(0..12, 12);
    for (name, q) in &queries {
        let training = training_db(q);
        let cfg = TransConfig::with_training(training.clone());
        let (fin, inf) = rw(q, &cfg).unwrap();
        for component in [&fin, &inf] {
            let tuned = cnt(component, &training);
            assert!(is_ranf(&tuned), "{name}: cnt broke RANF");
            assert!(
                cost(&tuned, &training).unwrap() <= cost(component, &training).unwrap(),
                "{name}: cnt increased training cost"
            );
            for gamma in [0u8, 1] {
                let Ok((s, _)) = dg_generate(q, 3, gamma, 0) else { continue };
                let a = eval_ranf(component, &s).unwrap();
                let b = eval_ranf(&tuned, &s).unwrap();
                assert_eq!(a.rows, b.rows, "{name}: cnt changed semantics");
            }
        }
    }
}

#[test]
fn data_golf_postconditions_via_oracle() {
    for seed in 0..6u64 {
        let profile = if seed % 2 == 0 {
            QueryProfile::Evaluable
        } else {
            QueryProfile::Infinite
        };
        let q = rcq_core::datagolf::gen_random_query(seed, 10, profile);
        for gamma in [0u8, 1] {
            let (s, params) = dg_generate(&q, 4, gamma, 0).unwrap();
            let fv = q.fvseq();
            let idx: Vec<usize> = fv
                .iter()
                .map(|v| params.varlist.iter().position(|w| w == v).unwrap())
                .collect();
            let pos: Vec<Vec<Atom>> = params
                .pos
                .iter()
                .map(|t| idx.iter().map(|&i| t[i].clone()).collect())
                .collect();
            let neg: Vec<Vec<Atom>> = params
                .neg
                .iter()
                .map(|t| idx.iter().map(|&i| t[i].clone()).collect())
                .collect();
            for sat in oracle_check_tuples(&q, &s, &pos).unwrap() {
                assert!(sat, "positive tuple rejected (seed {seed}, gamma {gamma})");
            }
            for sat in oracle_check_tuples(&q, &s, &neg).unwrap() {
                assert!(!sat, "negative tuple accepted (seed {seed}, gamma {gamma})");
            }
            let m = params.pos.len().min(params.neg.len()) as u128;
            let dom = rcq_core::oracle::oracle_domain(&q, &s);
            for sub in q.subqueries() {
                let (sat, unsat) = oracle_sat_counts_dom(&sub, &s, &dom).unwrap();
                assert!(
                    sat >= m && unsat >= m,
                    "trivial subquery {} (sat {sat}, unsat {unsat})",
                    print_query(&sub)
                );
            }
        }
    }
}

#[test]
fn evaluators_agree_on_ranf_corpus() {
    // production evaluator vs brute force over the extended domain,
    // restricted to active-domain tuples
    let queries = generated_corpus(0..10, 10);
    for (name, q) in &queries {
        let cfg = TransConfig::with_training(training_db(q));
        let (fin, _) = rw(q, &cfg).unwrap();
        let Ok((s, _)) = dg_generate(q, 2, 1, 0) else { continue };
        let dom = extended_dom(&fin, &s);
        let brute = eval_fin_dom(&fin, &s, &dom);
        let Ok(brute) = brute else { continue };
        let fast = eval_ranf(&fin, &s).unwrap();
        assert_eq!(fast.rows, brute.rows, "{name}: evaluator disagreement");
        // domain independence: no brute-force row uses atoms outside adom
        let active = adom(&fin, &s);
        for row in &brute.rows {
            assert!(row.iter().all(|a| active.contains(a)), "{name}: fresh atom leaked");
        }
    }
}

#[test]
fn vgt_mode_rejects_non_evaluable_queries() {
    assert!(!is_evaluable(&q_susp_user()));
    assert!(is_evaluable(&q_susp()));
    assert!(is_evaluable(&rcq_core::corpus::q_susp_text()));
}

#[test]
fn translated_suspicious_query_matches_handwritten_algebra() {
    // the textbook plan: project suspicious brands out of
    // ((π_{u,s}(S) × B) ▷ π_{b,u,s}((π_{u,s}(S) × P) ▷ S)) ∪ (B − π_b(P))
    use rcq_core::ra::{eval_ra, RAExpr};
    fn rel(name: &str, cols: &[&str]) -> RAExpr {
        RAExpr::Rel {
            name: name.into(),
            cols: cols.iter().map(|c| c.to_string()).collect(),
        }
    }
    fn project(e: RAExpr, cols: &[&str]) -> RAExpr {
        RAExpr::Project {
            input: Box::new(e),
            cols: cols.iter().map(|c| c.to_string()).collect(),
        }
    }
    let users_scores = project(rel("S", &["p", "u", "s"]), &["u", "s"]);
    let left = RAExpr::Join(
        Box::new(users_scores.clone()),
        Box::new(rel("B", &["b"])),
    );
    let uncovered = project(
        RAExpr::AntiJoin(
            Box::new(RAExpr::Join(
                Box::new(users_scores),
                Box::new(rel("P", &["b", "p"])),
            )),
            Box::new(rel("S", &["p", "u", "s"])),
        ),
        &["b", "u", "s"],
    );
    let no_products = RAExpr::Diff(
        Box::new(rel("B", &["b"])),
        Box::new(project(rel("P", &["b", "p"]), &["b"])),
    );
    let plan = RAExpr::Union(
        Box::new(project(RAExpr::AntiJoin(Box::new(left), Box::new(uncovered)), &["b"])),
        Box::new(no_products),
    );

    // the structure family: n brands each with their product, every product
    // scored by m reviewer/score pairs except brand n's product by none
    for (n, m) in [(2i64, 2i64), (3, 2)] {
        let mut s = Structure::new();
        for b in 1..=n {
            s.insert("B", vec![Atom::Int(b)]);
            s.insert("P", vec![Atom::Int(b), Atom::Int(100 + b)]);
        }
        for b in 1..n {
            for r in 1..=m {
                s.insert("S", vec![Atom::Int(100 + b), Atom::Int(200 + r), Atom::Int(r)]);
            }
        }
        let by_plan = eval_ra(&plan, &s).unwrap();
        let q = q_susp();
        let cfg = TransConfig::with_training(training_db(&q));
        let (fin, inf) = rw(&q, &cfg).unwrap();
        assert!(eval_ranf(&inf, &s).unwrap().is_empty());
        let by_translation = eval_ranf(&fin, &s).unwrap();
        assert_eq!(by_translation.rows, by_plan.rows, "n={n} m={m}");
    }
}

#[test]
fn extra_propagation_pass_is_semantically_transparent() {
    // the pass keeps queries small; switching it off must not change what
    // the translation computes
    let queries = generated_corpus(0..8, 10);
    for (name, q) in &queries {
        let training = training_db(q);
        let with = TransConfig {
            cp_extra: true,
            training: training.clone(),
            ..TransConfig::default()
        };
        let without = TransConfig {
            cp_extra: false,
            training,
            ..TransConfig::default()
        };
        let (fin_a, inf_a) = rw(q, &with).unwrap();
        let (fin_b, inf_b) = rw(q, &without).unwrap();
        for gamma in [0u8, 1] {
            let Ok((s, _)) = dg_generate(q, 3, gamma, 0) else { continue };
            assert_eq!(
                eval_ranf(&inf_a, &s).unwrap().is_empty(),
                eval_ranf(&inf_b, &s).unwrap().is_empty(),
                "{name}: closed components disagree"
            );
            assert_eq!(
                eval_ranf(&fin_a, &s).unwrap().rows,
                eval_ranf(&fin_b, &s)
                    .unwrap()
                    .project(&fin_a.fvseq())
                    .rows,
                "{name}: finite components disagree"
            );
        }
    }
}

#[test]
fn closed_component_lowers_to_at_most_one_row() {
    let q = q_susp_user();
    let cfg = TransConfig::with_training(training_db(&q));
    let (_, inf) = rw(&q, &cfg).unwrap();
    for rows in [
        [vec![Atom::int(1)]].as_slice(),
        [vec![Atom::int(1)], vec![Atom::int(2)]].as_slice(),
    ] {
        let s = Structure::new()
            .with_relation("B", rows.to_vec())
            .with_relation("P", [vec![Atom::int(1), Atom::int(10)]])
            .with_relation("S", [vec![Atom::int(10), Atom::int(20), Atom::int(30)]]);
        let ra = rcq_core::ra::ranf2ra(&inf).unwrap();
        let rel = rcq_core::ra::eval_ra(&ra, &s).unwrap();
        assert!(rel.len() <= 1, "closed query produced {} rows", rel.len());
        let direct = eval_ranf(&inf, &s).unwrap();
        assert_eq!(rel.is_empty(), direct.is_empty());
    }
}

#[test]
fn sz_decreases_into_srnf_recursions() {
    // the measure shrinks from each rewritten query to the subqueries the
    // normalizer recurses into next
    let a = parse("B(x) AND P2(x, y)");
    let (l, r) = (parse("B(x)"), parse("P2(x, y)"));
    let neg = |q: &Query| rcq_core::syntax::not(q.clone());
    assert!(neg(&l).sz() < neg(&a).sz() && neg(&r).sz() < neg(&a).sz());
    let o = parse("B(x) OR P2(x, y)");
    assert!(neg(&l).sz() < neg(&o).sz() && neg(&r).sz() < neg(&o).sz());
    assert!(parse("B(x)").sz() < parse("NOT NOT B(x)").sz());
    let dist = parse("EXISTS v. B(x) OR P2(x, y)");
    assert!(parse("EXISTS v. B(x)").sz() < dist.sz());
    assert!(parse("EXISTS v. P2(x, y)").sz() < dist.sz());
}

//! The test corpus: named fixture queries, pseudorandom generated queries,
//! and the batch verification cells used by the acceptance suite and the
//! benchmark runner.

use crate::datagolf::{dg_generate, gen_random_query, training_db, QueryProfile};
use crate::eval::eval_ranf;
use crate::oracle::CaptureResult;
use crate::parser::parse_query_infer;
use crate::structure::Structure;
use crate::syntax::Query;
use crate::translate::{rw, TransConfig};

pub fn parse_fixture(text: &str) -> Query {
    parse_query_infer(text).expect("fixture must parse").0
}

/// The suspicious-brands query.
pub fn q_susp() -> Query {
    parse_fixture("B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)")
}

/// The domain-dependent variant exposing the reviewer.
pub fn q_susp_user() -> Query {
    parse_fixture("B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)")
}

/// The variant with an additional review-text relation.
pub fn q_susp_text() -> Query {
    parse_fixture(
        "B(b) AND EXISTS u, s, t. FORALL p. P(b, p) -> (S(p, u, s) OR T(p, u, t))",
    )
}

/// Literal benchmark queries. The first ten are evaluable, the `qi` ones are
/// not and admit infinite results.
pub fn fixture_queries() -> Vec<(&'static str, Query)> {
    let q = |text: &str| parse_fixture(text);
    vec![
        ("q1", q("(NOT (EXISTS x2. (NOT (EXISTS x3. ((P3(x1, x0, x3) AND (NOT (EXISTS x4. P4(x1, x3, x4, x2)))) AND (EXISTS x4. P2(x1, x4))))))) OR Q2(x1, x0)")),
        ("q2", q("(NOT (EXISTS x2. (NOT (EXISTS x3. ((NOT P4(x1, x0, x2, x3)) AND P3(x1, x3, x0)))))) AND (EXISTS x2, x3. ((x1 = x2) AND Q3(x0, x2, x3)))")),
        ("q3", q("(EXISTS x2. (NOT (EXISTS x3. ((P3(x1, x0, x3) AND P1(x0)) AND ((x0 = x1) AND (NOT P4(x1, x2, x3, x0))))))) AND (EXISTS x2. Q3(x1, x2, x0))")),
        ("q4", q("((EXISTS x2. P3(x1, x2, x0)) AND (NOT x0 = x1)) AND (NOT (EXISTS x2. (NOT (EXISTS x3. (P2(x0, x3) AND (NOT P4(x1, x3, x2, x0)))))))")),
        ("q5", q("(EXISTS x2, x3. (NOT (EXISTS x4. ((EXISTS x5. P3(x0, x5, x4)) AND (NOT P4(x0, x4, x2, x3)))))) AND ((NOT x0 = x1) AND P2(x0, x1))")),
        ("q6", q("(EXISTS x2. (NOT (EXISTS x3. (((NOT (EXISTS x4. P3(x0, x3, x4))) AND Q3(x0, x1, x3)) AND (NOT R3(x0, x2, x1)))))) AND (EXISTS x2. S3(x0, x1, x2))")),
        ("q7", q("(EXISTS x2. (P3(x0, x2, x1) AND (x0 = x2))) AND (EXISTS x2. (NOT (EXISTS x3. ((NOT (EXISTS x4, x5. P4(x0, x2, x5, x4))) AND P2(x1, x3)))))")),
        ("q8", q("NOT (EXISTS x2. (NOT (EXISTS x3. ((EXISTS x4. (P3(x0, x3, x1) AND (P4(x0, x3, x1, x4) AND (x3 = x4)))) AND (NOT (EXISTS x4. Q4(x0, x4, x3, x2)))))))")),
        ("q9", q("(P2(x1, x0) AND (EXISTS x2. (NOT (EXISTS x3. (((NOT P4(x1, x3, x2, x0)) AND P3(x0, x3, x1)) AND (NOT Q2(x0, x3))))))) AND (x0 = x1)")),
        ("q10", q("(EXISTS x2. P3(x1, x2, x0)) OR (NOT (EXISTS x2. (NOT (EXISTS x3. ((NOT P2(x1, x2)) AND (EXISTS x4. (P1(x0) AND P4(x0, x3, x1, x4))))))))")),
        ("qi1", q("P1(x0) AND (NOT (EXISTS x2, x3. (P3(x0, x2, x3) AND (NOT x0 = x1))))")),
        ("qi2", q("P1(x0) AND (NOT (EXISTS x2, x3. (P3(x0, x2, x3) AND (NOT P2(x1, x3)))))")),
        ("qi3", q("P1(x0) AND (NOT (EXISTS x2, x3. (P3(x0, x3, x2) AND (NOT x1 = x2))))")),
        ("qi4", q("P1(x1) AND (NOT (EXISTS x2, x3. (P3(x1, x3, x2) AND (NOT P4(x1, x0, x3, x2)))))")),
        ("qi5", q("P1(x0) AND (NOT (EXISTS x2, x3. (P3(x0, x2, x3) AND (NOT Q3(x1, x2, x3)))))")),
    ]
}

/// Deterministic generated corpus: even seeds evaluable at the given size,
/// odd seeds the infinite profile.
pub fn generated_corpus(seeds: std::ops::Range<u64>, size: usize) -> Vec<(String, Query)> {
    seeds
        .map(|seed| {
            let (profile, sz) = if seed % 2 == 0 {
                (QueryProfile::Evaluable, size)
            } else {
                (QueryProfile::Infinite, size.min(12))
            };
            let q = gen_random_query(seed, sz, profile);
            (format!("gen{seed}"), q)
        })
        .collect()
}

/// One verification unit: a query with its translation and one structure.
#[derive(Clone, Debug)]
pub struct CaptureCell {
    pub name: String,
    pub query: Query,
    pub fin: Query,
    pub inf: Query,
    pub structure: Structure,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

/// Builds cells for every query against hard instances of each requested
/// size and strategy. Queries outside the instance generator's assumptions
/// are skipped.
pub fn capture_cells(
    queries: &[(String, Query)],
    sizes: &[usize],
    strategies: &[u8],
) -> Vec<CaptureCell> {
    let mut out = Vec::new();
    for (name, q) in queries {
        let cfg = TransConfig::with_training(training_db(q));
        let Ok((fin, inf)) = rw(q, &cfg) else {
            continue;
        };
        for &n in sizes {
            for &gamma in strategies {
                if let Ok((s, _)) = dg_generate(q, n, gamma, 0) {
                    out.push(CaptureCell {
                        name: format!("{name}/n{n}/g{gamma}"),
                        query: q.clone(),
                        fin: fin.clone(),
                        inf: inf.clone(),
                        structure: s.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Checks the capturability contract on one cell: the closed component
/// holds exactly when the oracle reports an infinite result, and on finite
/// results the row sets agree exactly.
pub fn verify_capture_cell(cell: &CaptureCell) -> CellOutcome {
    let fail = |detail: String| CellOutcome {
        name: cell.name.clone(),
        ok: false,
        detail,
    };
    // larger-than-default guard: batch cells legitimately reach tens of
    // millions of join/lift steps on the bigger instances
    let oracle = match crate::oracle::capture_oracle_budget(
        &cell.query,
        &cell.structure,
        0,
        400_000_000,
    ) {
        Ok(o) => o,
        Err(e) => return fail(format!("oracle error: {e}")),
    };
    let inf_rel = match eval_ranf(&cell.inf, &cell.structure) {
        Ok(r) => r,
        Err(e) => return fail(format!("inf evaluation error: {e}")),
    };
    let inf_holds = !inf_rel.is_empty();
    match oracle {
        CaptureResult::Infinite => {
            if inf_holds {
                CellOutcome {
                    name: cell.name.clone(),
                    ok: true,
                    detail: "infinite".into(),
                }
            } else {
                fail("oracle says infinite but the closed component is empty".into())
            }
        }
        CaptureResult::Finite(expected) => {
            if inf_holds {
                return fail("oracle says finite but the closed component holds".into());
            }
            let fin_rel = match eval_ranf(&cell.fin, &cell.structure) {
                Ok(r) => r,
                Err(e) => return fail(format!("fin evaluation error: {e}")),
            };
            let got = if cell.query.fv().is_empty() {
                fin_rel.rows.clone()
            } else {
                fin_rel.project(&cell.query.fvseq()).rows
            };
            if got == expected.rows {
                CellOutcome {
                    name: cell.name.clone(),
                    ok: true,
                    detail: format!("finite, {} rows", expected.rows.len()),
                }
            } else {
                fail(format!(
                    "row mismatch: translation {} rows, oracle {} rows",
                    got.len(),
                    expected.rows.len()
                ))
            }
        }
    }
}

pub fn verify_capture_batch_seq(cells: &[CaptureCell]) -> Vec<CellOutcome> {
    crate::par::map_seq(cells, verify_capture_cell)
}

#[cfg(feature = "parallel")]
pub fn verify_capture_batch_par(cells: &[CaptureCell]) -> Vec<CellOutcome> {
    crate::par::map_par(cells, verify_capture_cell)
}

/// Feature-dispatched batch verification.
pub fn verify_capture_batch(cells: &[CaptureCell]) -> Vec<CellOutcome> {
    crate::par::map_auto(cells, verify_capture_cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse_and_classify() {
        let fixtures = fixture_queries();
        assert_eq!(fixtures.len(), 15);
        for (name, q) in &fixtures {
            let expect_evaluable = !name.starts_with("qi");
            assert_eq!(
                crate::vgt::is_evaluable(q),
                expect_evaluable,
                "classification mismatch for {name}"
            );
        }
    }

    #[test]
    fn capture_contract_holds_on_a_small_slice() {
        let queries: Vec<(String, Query)> = vec![
            ("susp".into(), q_susp()),
            ("gen0".into(), gen_random_query(0, 10, QueryProfile::Evaluable)),
            ("gen1".into(), gen_random_query(1, 8, QueryProfile::Infinite)),
        ];
        let cells = capture_cells(&queries, &[2], &[0, 1]);
        assert!(!cells.is_empty());
        for outcome in verify_capture_batch(&cells) {
            assert!(outcome.ok, "{}: {}", outcome.name, outcome.detail);
        }
    }
}

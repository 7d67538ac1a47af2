//! Canonical printer. Emits the fully parenthesized form; parsing the output
//! reproduces the AST exactly, which is what golden tests compare.

use crate::syntax::{Query, Term};
use std::fmt::Write;

pub fn print_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(a) => a.to_string(),
    }
}

/// Fully parenthesized canonical form. Runs of binders are regrouped into a
/// single `EXISTS v1, ..., vk.` prefix.
pub fn print_query(q: &Query) -> String {
    let mut out = String::new();
    write_query(q, &mut out);
    out
}

fn write_query(q: &Query, out: &mut String) {
    match q {
        Query::False => out.push_str("FALSE"),
        Query::True => out.push_str("TRUE"),
        Query::Eq(x, t) => {
            let _ = write!(out, "{x} = {}", print_term(t));
        }
        Query::MulEq { result, lhs, rhs } => {
            let _ = write!(out, "{result} = {lhs} * {rhs}");
        }
        Query::Pred(name, args) => {
            let rendered: Vec<String> = args.iter().map(print_term).collect();
            let _ = write!(out, "{name}({})", rendered.join(", "));
        }
        Query::Not(inner) => {
            out.push_str("(NOT ");
            write_query(inner, out);
            out.push(')');
        }
        Query::And(a, b) => {
            out.push('(');
            write_query(a, out);
            out.push_str(" AND ");
            write_query(b, out);
            out.push(')');
        }
        Query::Or(a, b) => {
            out.push('(');
            write_query(a, out);
            out.push_str(" OR ");
            write_query(b, out);
            out.push(')');
        }
        Query::Exists(x, body) => {
            let mut vars = vec![x.clone()];
            let mut inner: &Query = body;
            while let Query::Exists(y, next) = inner {
                vars.push(y.clone());
                inner = next;
            }
            let _ = write!(out, "(EXISTS {}. ", vars.join(", "));
            write_query(inner, out);
            out.push(')');
        }
        Query::CntAgg {
            result,
            bound,
            body,
        } => {
            let _ = write!(out, "(CNT {result}: {}. ", bound.join(", "));
            write_query(body, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query_infer;
    use crate::syntax::*;

    #[test]
    fn regroups_binder_runs() {
        let q = exists("u", exists("s", pred("S", vec![var("p"), var("u"), var("s")])));
        assert_eq!(print_query(&q), "(EXISTS u, s. S(p, u, s))");
    }

    #[test]
    fn roundtrips_through_parser() {
        let q = and(
            pred("B", vec![var("b")]),
            exists(
                "u",
                not(or(
                    eq("u", cst(crate::atom::Atom::int(3))),
                    eq("u", cst(crate::atom::Atom::text("it's"))),
                )),
            ),
        );
        let text = print_query(&q);
        let (parsed, _) = parse_query_infer(&text).unwrap();
        assert_eq!(parsed, q);
    }

    #[test]
    fn prints_aggregation_and_product() {
        let q = Query::CntAgg {
            result: "c".into(),
            bound: vec!["y".into()],
            body: Box::new(pred("P", vec![var("x"), var("y")])),
        };
        assert_eq!(print_query(&q), "(CNT c: y. P(x, y))");
        let m = Query::MulEq {
            result: "c".into(),
            lhs: "c1".into(),
            rhs: "c2".into(),
        };
        assert_eq!(print_query(&m), "c = c1 * c2");
        let (parsed, _) = parse_query_infer("c = c1 * c2").unwrap();
        assert_eq!(parsed, m);
    }
}

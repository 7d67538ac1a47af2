//! Concrete query syntax.
//!
//! ```text
//! query  := "FALSE" | "TRUE" | ident "=" term | ident "(" term {"," term} ")"
//!         | "NOT" query | query "AND" query | query "OR" query | query "->" query
//!         | ("EXISTS" | "FORALL") ident {"," ident} "." query
//!         | "CNT" ident ":" ident {"," ident} "." query
//!         | "(" query ")"
//! term   := ident | integer | quoted-string
//! ident  := [a-zA-Z_][a-zA-Z0-9_]*
//! ```
//!
//! Precedence: `NOT` > `AND` > `OR` > `->`; quantifier bodies extend
//! maximally to the right. `FORALL v. Q` is sugar for `NOT EXISTS v. NOT Q`
//! and `A -> B` for `(NOT A) OR B`. Keywords are case sensitive.

use crate::atom::Atom;
use crate::syntax::{Query, Signature, Term};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Eqs,
    Arrow,
    Star,
    Colon,
}

const KEYWORDS: &[&str] = &["FALSE", "TRUE", "NOT", "AND", "OR", "EXISTS", "FORALL", "CNT"];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            '.' => {
                out.push((Tok::Dot, i));
                i += 1;
            }
            '=' => {
                out.push((Tok::Eqs, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, i));
                i += 1;
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    out.push((Tok::Arrow, i));
                    i += 2;
                } else if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    let start = i;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let v: i64 = text[start..i].parse().map_err(|_| ParseError {
                        pos: start,
                        message: "integer literal out of range".into(),
                    })?;
                    out.push((Tok::Int(v), start));
                } else {
                    return Err(ParseError {
                        pos: i,
                        message: "expected '->' or integer after '-'".into(),
                    });
                }
            }
            '\'' => {
                let start = i;
                i += 1;
                let mut s = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(ParseError {
                            pos: start,
                            message: "unterminated string literal".into(),
                        });
                    }
                    if bytes[i] == b'\'' {
                        if i + 1 < bytes.len() && bytes[i + 1] == b'\'' {
                            s.push('\'');
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    } else {
                        s.push(bytes[i] as char);
                        i += 1;
                    }
                }
                out.push((Tok::Str(s), start));
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v: i64 = text[start..i].parse().map_err(|_| ParseError {
                    pos: start,
                    message: "integer literal out of range".into(),
                })?;
                out.push((Tok::Int(v), start));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            '#' => {
                // comment to end of line
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            _ => {
                return Err(ParseError {
                    pos: i,
                    message: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    sig: Option<&'a Signature>,
    inferred: Signature,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, p)| p)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn err(&self, message: String) -> ParseError {
        ParseError {
            pos: self.here(),
            message,
        }
    }

    fn is_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    // implication level, right associative
    fn query(&mut self) -> Result<Query, ParseError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let rhs = self.query()?;
            Ok(crate::syntax::or(crate::syntax::not(lhs), rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Query, ParseError> {
        let mut q = self.conjunction()?;
        while self.is_ident("OR") {
            self.pos += 1;
            let rhs = self.conjunction()?;
            q = crate::syntax::or(q, rhs);
        }
        Ok(q)
    }

    fn conjunction(&mut self) -> Result<Query, ParseError> {
        let mut q = self.unary()?;
        while self.is_ident("AND") {
            self.pos += 1;
            let rhs = self.unary()?;
            q = crate::syntax::and(q, rhs);
        }
        Ok(q)
    }

    fn unary(&mut self) -> Result<Query, ParseError> {
        if self.is_ident("NOT") {
            self.pos += 1;
            let q = self.unary()?;
            return Ok(crate::syntax::not(q));
        }
        if self.is_ident("EXISTS") || self.is_ident("FORALL") {
            let universal = self.is_ident("FORALL");
            self.pos += 1;
            let vars = self.binder_vars()?;
            self.expect(Tok::Dot, "'.' after quantifier variables")?;
            let body = self.query()?;
            let mut q = if universal {
                crate::syntax::not(body)
            } else {
                body
            };
            for v in vars.into_iter().rev() {
                q = crate::syntax::exists(v, q);
            }
            if universal {
                q = crate::syntax::not(q);
            }
            return Ok(q);
        }
        if self.is_ident("CNT") {
            self.pos += 1;
            let result = self.ident("aggregation result variable")?;
            self.expect(Tok::Colon, "':' after aggregation result variable")?;
            let bound = self.binder_vars()?;
            self.expect(Tok::Dot, "'.' after aggregation variables")?;
            let body = self.query()?;
            let mut seen = std::collections::BTreeSet::new();
            for v in &bound {
                if !seen.insert(v.clone()) {
                    return Err(self.err(format!("duplicate aggregation variable {v}")));
                }
            }
            if seen.contains(&result) {
                return Err(self.err("aggregation result clashes with bound variable".into()));
            }
            return Ok(Query::CntAgg {
                result,
                bound,
                body: Box::new(body),
            });
        }
        self.atom()
    }

    fn binder_vars(&mut self) -> Result<Vec<String>, ParseError> {
        let mut vars = vec![self.ident("quantified variable")?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            vars.push(self.ident("quantified variable")?);
        }
        Ok(vars)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.bump() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => Ok(s),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn atom(&mut self) -> Result<Query, ParseError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let q = self.query()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(q)
            }
            Some(Tok::Ident(name)) => {
                if name == "TRUE" {
                    self.pos += 1;
                    return Ok(Query::True);
                }
                if name == "FALSE" {
                    self.pos += 1;
                    return Ok(Query::False);
                }
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(self.err(format!("unexpected keyword {name}")));
                }
                self.pos += 1;
                match self.peek() {
                    Some(Tok::LParen) => {
                        self.pos += 1;
                        let mut args = vec![self.term()?];
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            args.push(self.term()?);
                        }
                        self.expect(Tok::RParen, "')' after predicate arguments")?;
                        self.check_arity(&name, args.len())?;
                        Ok(Query::Pred(name, args))
                    }
                    Some(Tok::Eqs) => {
                        self.pos += 1;
                        let t = self.term()?;
                        // `c = a * b` is the arithmetic constraint form
                        if self.peek() == Some(&Tok::Star) {
                            self.pos += 1;
                            let rhs = self.ident("variable after '*'")?;
                            let lhs = match t {
                                Term::Var(v) => v,
                                Term::Const(_) => {
                                    return Err(
                                        self.err("product operands must be variables".into())
                                    )
                                }
                            };
                            return Ok(Query::MulEq {
                                result: name,
                                lhs,
                                rhs,
                            });
                        }
                        Ok(Query::Eq(name, t))
                    }
                    _ => Err(self.err(format!(
                        "expected '(' or '=' after identifier {name}"
                    ))),
                }
            }
            _ => Err(self.err("expected a query".into())),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Some(Tok::Int(v)) => Ok(Term::Const(Atom::Int(v))),
            Some(Tok::Str(s)) => Ok(Term::Const(Atom::Text(s))),
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let declared_const = self
                    .sig
                    .map(|sig| sig.constants.contains(&Atom::Text(s.clone())))
                    .unwrap_or(false);
                if declared_const {
                    Ok(Term::Const(Atom::Text(s)))
                } else {
                    Ok(Term::Var(s))
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a term".into()))
            }
        }
    }

    fn check_arity(&mut self, name: &str, n: usize) -> Result<(), ParseError> {
        if let Some(sig) = self.sig {
            match sig.arity(name) {
                Some(k) if k == n => Ok(()),
                Some(k) => Err(self.err(format!(
                    "arity mismatch: {name} declared with arity {k}, used with {n}"
                ))),
                None => Err(self.err(format!("unknown predicate symbol {name}"))),
            }
        } else {
            match self.inferred.arity(name) {
                Some(k) if k != n => Err(self.err(format!(
                    "inconsistent arity for {name}: {k} earlier, {n} here"
                ))),
                _ => {
                    self.inferred.arities.insert(name.to_string(), n);
                    Ok(())
                }
            }
        }
    }
}

/// Parses against a known signature, checking predicate arities.
pub fn parse_query(text: &str, sig: &Signature) -> Result<Query, ParseError> {
    parse_with(text, Some(sig)).map(|(q, _)| q)
}

/// Parses standalone text, inferring the signature from predicate use.
pub fn parse_query_infer(text: &str) -> Result<(Query, Signature), ParseError> {
    parse_with(text, None)
}

fn parse_with(text: &str, sig: Option<&Signature>) -> Result<(Query, Signature), ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        sig,
        inferred: sig.cloned().unwrap_or_default(),
        end: text.len(),
    };
    let q = p.query()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after query".into()));
    }
    Ok((q, p.inferred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{and, eq, exists, not, or, pred, var};

    fn sig() -> Signature {
        Signature::new()
            .with_arity("B", 1)
            .with_arity("P", 2)
            .with_arity("S", 3)
    }

    #[test]
    fn parses_leaf_literals() {
        assert_eq!(parse_query("TRUE", &sig()).unwrap(), Query::True);
        assert_eq!(parse_query("FALSE", &sig()).unwrap(), Query::False);
        assert_eq!(
            parse_query("EXISTS x. x = y", &sig()).unwrap(),
            exists("x", eq("x", var("y")))
        );
    }

    #[test]
    fn parses_suspicious_brands_query() {
        let q = parse_query(
            "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
            &sig(),
        )
        .unwrap();
        let body = or(
            not(pred("P", vec![var("b"), var("p")])),
            pred("S", vec![var("p"), var("u"), var("s")]),
        );
        let expected = and(
            pred("B", vec![var("b")]),
            exists("u", exists("s", not(exists("p", not(body))))),
        );
        assert_eq!(q, expected);
    }

    #[test]
    fn precedence_not_and_or_imp() {
        let q = parse_query("NOT B(x) AND B(y) OR B(z) -> B(w)", &sig()).unwrap();
        // ((NOT B(x) AND B(y)) OR B(z)) -> B(w)
        let lhs = or(
            and(not(pred("B", vec![var("x")])), pred("B", vec![var("y")])),
            pred("B", vec![var("z")]),
        );
        assert_eq!(q, or(not(lhs), pred("B", vec![var("w")])));
    }

    #[test]
    fn arity_mismatch_reported() {
        let err = parse_query("B(x, y)", &sig()).unwrap_err();
        assert!(err.message.contains("arity mismatch"), "{err}");
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_query("B(x) AND", &sig()).unwrap_err();
        assert_eq!(err.pos, 8);
    }

    #[test]
    fn infers_signature() {
        let (q, sig) = parse_query_infer("R(x, y) AND R(y, z)").unwrap();
        assert_eq!(sig.arity("R"), Some(2));
        assert_eq!(q.fvseq(), vec!["x", "y", "z"]);
        assert!(parse_query_infer("R(x) AND R(x, y)").is_err());
    }

    #[test]
    fn quantifier_body_extends_right() {
        let q = parse_query("EXISTS x. B(x) AND B(y)", &sig()).unwrap();
        assert_eq!(
            q,
            exists("x", and(pred("B", vec![var("x")]), pred("B", vec![var("y")])))
        );
    }
}

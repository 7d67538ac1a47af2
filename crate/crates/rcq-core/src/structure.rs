//! Finite structures (databases) and relations with named columns.

use crate::atom::Atom;
use crate::syntax::{Signature, Var};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Tuple = Vec<Atom>;

/// Finite interpretations of predicate and constant symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Structure {
    pub interps: BTreeMap<String, BTreeSet<Tuple>>,
    pub consts: BTreeMap<String, Atom>,
}

impl Structure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rel: &str, tuple: Tuple) {
        self.interps.entry(rel.to_string()).or_default().insert(tuple);
    }

    pub fn with_relation<I>(mut self, rel: &str, tuples: I) -> Self
    where
        I: IntoIterator<Item = Tuple>,
    {
        let entry = self.interps.entry(rel.to_string()).or_default();
        entry.extend(tuples);
        self
    }

    pub fn relation(&self, rel: &str) -> Option<&BTreeSet<Tuple>> {
        self.interps.get(rel)
    }

    /// Interpretation of a constant symbol; unknown symbols denote themselves.
    pub fn interpret_const(&self, a: &Atom) -> Atom {
        if let Atom::Text(name) = a {
            if let Some(v) = self.consts.get(name) {
                return v.clone();
            }
        }
        a.clone()
    }

    /// Union of interpretations; later relations extend earlier ones.
    pub fn union(mut self, other: Structure) -> Structure {
        for (r, tuples) in other.interps {
            self.interps.entry(r).or_default().extend(tuples);
        }
        self.consts.extend(other.consts);
        self
    }

    /// Signature inferred from the stored relations.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        for (r, tuples) in &self.interps {
            let arity = tuples.iter().next().map(|t| t.len()).unwrap_or(0);
            sig.arities.insert(r.clone(), arity);
        }
        sig
    }

    /// Every atom stored in any relation.
    pub fn all_atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for tuples in self.interps.values() {
            for t in tuples {
                out.extend(t.iter().cloned());
            }
        }
        out
    }

    pub fn total_tuples(&self) -> usize {
        self.interps.values().map(|t| t.len()).sum()
    }
}

/// A finite relation: distinct column names and rows of matching width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub columns: Vec<Var>,
    pub rows: BTreeSet<Tuple>,
}

impl Relation {
    pub fn new(columns: Vec<Var>) -> Self {
        debug_assert!(
            columns.iter().collect::<BTreeSet<_>>().len() == columns.len(),
            "relation columns must be distinct"
        );
        Relation {
            columns,
            rows: BTreeSet::new(),
        }
    }

    pub fn with_rows<I>(columns: Vec<Var>, rows: I) -> Self
    where
        I: IntoIterator<Item = Tuple>,
    {
        let mut rel = Relation::new(columns);
        for row in rows {
            debug_assert_eq!(row.len(), rel.columns.len());
            rel.rows.insert(row);
        }
        rel
    }

    /// The nullary relation holding the empty tuple (logical truth).
    pub fn unit() -> Self {
        Relation::with_rows(vec![], [vec![]])
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn col_index(&self, col: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == col)
    }

    /// Reorders columns to `target`, which must be a permutation subset of the
    /// current columns; projects rows accordingly (and deduplicates).
    pub fn project(&self, target: &[Var]) -> Relation {
        let idx: Vec<usize> = target
            .iter()
            .map(|c| self.col_index(c).expect("projection column missing"))
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| idx.iter().map(|&i| row[i].clone()).collect());
        Relation::with_rows(target.to_vec(), rows)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "({})", self.columns.join(", "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|a| a.to_string()).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FactsError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for FactsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "facts file, line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FactsError {}

/// Parses a facts file: one `r(v1, ..., vk).` per line, values integer
/// literals or single-quoted text; `@arity r k` and `@const name value`
/// headers; `#` comments and blank lines ignored.
pub fn parse_facts(text: &str) -> Result<(Structure, Signature), FactsError> {
    let mut s = Structure::new();
    let mut sig = Signature::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("@arity") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(FactsError {
                    line: lineno,
                    message: "expected `@arity name k`".into(),
                });
            }
            let k: usize = parts[1].parse().map_err(|_| FactsError {
                line: lineno,
                message: "arity must be a natural number".into(),
            })?;
            sig.arities.insert(parts[0].to_string(), k);
            continue;
        }
        if let Some(rest) = line.strip_prefix("@const") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(FactsError {
                    line: lineno,
                    message: "expected `@const name value`".into(),
                });
            }
            let value = parse_value(parts[1]).ok_or_else(|| FactsError {
                line: lineno,
                message: "bad constant value".into(),
            })?;
            sig.constants.insert(Atom::Text(parts[0].to_string()));
            s.consts.insert(parts[0].to_string(), value);
            continue;
        }
        let fact = line.strip_suffix('.').unwrap_or(line);
        let open = fact.find('(').ok_or_else(|| FactsError {
            line: lineno,
            message: "expected `r(v1, ..., vk).`".into(),
        })?;
        let close = fact.rfind(')').ok_or_else(|| FactsError {
            line: lineno,
            message: "missing closing parenthesis".into(),
        })?;
        let name = fact[..open].trim();
        if name.is_empty() {
            return Err(FactsError {
                line: lineno,
                message: "missing relation name".into(),
            });
        }
        let args = &fact[open + 1..close];
        let mut tuple = Vec::new();
        if !args.trim().is_empty() {
            for piece in split_args(args) {
                let piece = piece.trim();
                let v = parse_value(piece).ok_or_else(|| FactsError {
                    line: lineno,
                    message: format!("bad value {piece:?}"),
                })?;
                tuple.push(v);
            }
        }
        if let Some(&k) = sig.arities.get(name) {
            if k != tuple.len() {
                return Err(FactsError {
                    line: lineno,
                    message: format!(
                        "arity mismatch for {name}: declared {k}, fact has {}",
                        tuple.len()
                    ),
                });
            }
        } else {
            sig.arities.insert(name.to_string(), tuple.len());
        }
        s.insert(name, tuple);
    }
    Ok((s, sig))
}

// split on commas not inside quotes
fn split_args(args: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut chars = args.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                if in_str && chars.peek() == Some(&'\'') {
                    cur.push('\'');
                    cur.push('\'');
                    chars.next();
                } else {
                    in_str = !in_str;
                    cur.push('\'');
                }
            }
            ',' if !in_str => {
                out.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn parse_value(text: &str) -> Option<Atom> {
    let t = text.trim();
    if let Some(stripped) = t.strip_prefix('\'') {
        let inner = stripped.strip_suffix('\'')?;
        return Some(Atom::Text(inner.replace("''", "'")));
    }
    t.parse::<i64>().ok().map(Atom::Int)
}

/// Renders a structure in the facts format, deterministically ordered.
pub fn write_facts(s: &Structure, sig: &Signature) -> String {
    let mut out = String::new();
    for (name, arity) in &sig.arities {
        out.push_str(&format!("@arity {name} {arity}\n"));
    }
    for (name, value) in &s.consts {
        out.push_str(&format!("@const {name} {value}\n"));
    }
    for (name, tuples) in &s.interps {
        for t in tuples {
            let cells: Vec<String> = t.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("{name}({}).\n", cells.join(", ")));
        }
    }
    out
}
